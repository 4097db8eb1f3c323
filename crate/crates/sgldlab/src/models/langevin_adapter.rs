//! Adapter exposing a rescaled-drift model (potential U with target
//! proportional to exp(2U), unit diffusion) in the plain Langevin
//! convention (drift `grad log density`, `sqrt(2h)` noise): every gradient,
//! potential value and Hessian is doubled. The target distribution is
//! unchanged; only the drift bookkeeping moves.

use super::{ModelError, ParamVector, PosteriorModel};
use nalgebra::DMatrix;

pub struct LangevinAdapter<'a> {
    inner: &'a dyn PosteriorModel,
}

impl<'a> LangevinAdapter<'a> {
    pub fn new(inner: &'a dyn PosteriorModel) -> Self {
        Self { inner }
    }
}

impl PosteriorModel for LangevinAdapter<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn data_len(&self) -> usize {
        self.inner.data_len()
    }

    fn grad_log_prior(&self, x: &ParamVector) -> Result<ParamVector, ModelError> {
        Ok(self.inner.grad_log_prior(x)?.scaled(2.0))
    }

    fn grad_log_lik_term(&self, i: usize, x: &ParamVector) -> Result<ParamVector, ModelError> {
        Ok(self.inner.grad_log_lik_term(i, x)?.scaled(2.0))
    }

    fn full_grad(&self, x: &ParamVector) -> Result<ParamVector, ModelError> {
        Ok(self.inner.full_grad(x)?.scaled(2.0))
    }

    fn log_posterior(&self, x: &ParamVector) -> f64 {
        2.0 * self.inner.log_posterior(x)
    }

    fn log_prior(&self, x: &ParamVector) -> f64 {
        2.0 * self.inner.log_prior(x)
    }

    fn log_lik_term(&self, i: usize, x: &ParamVector) -> f64 {
        2.0 * self.inner.log_lik_term(i, x)
    }

    fn hessian(&self, x: &ParamVector) -> DMatrix<f64> {
        self.inner.hessian(x) * 2.0
    }

    fn prior_hessian(&self, x: &ParamVector) -> DMatrix<f64> {
        self.inner.prior_hessian(x) * 2.0
    }

    fn lik_term_hessian(&self, i: usize, x: &ParamVector) -> DMatrix<f64> {
        self.inner.lik_term_hessian(i, x) * 2.0
    }

    fn exact_mode(&self) -> Option<ParamVector> {
        self.inner.exact_mode()
    }

    /// The Langevin chain on the doubled drift has contraction factor
    /// 1 - 2Ah, stable iff |1 - 2Ah| < 1, i.e. the same h < 1/A bound.
    fn stability_limit(&self) -> Option<f64> {
        self.inner.stability_limit()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GaussianConjugateModel;

    #[test]
    fn doubled_drift_is_grad_log_density() {
        let m = GaussianConjugateModel::new(1.0, 1.0, vec![0.5, 1.5]).unwrap();
        let adapted = LangevinAdapter::new(&m);
        let (mu, var_p) = m.exact_posterior();
        for x in [-1.0, 0.0, 0.8] {
            let g = adapted.full_grad(&ParamVector::scalar(x)).unwrap().as_scalar();
            let expect = -(x - mu) / var_p;
            assert!((g - expect).abs() < 1e-12, "{g} vs {expect}");
        }
    }

    #[test]
    fn mode_and_limit_pass_through() {
        let m = GaussianConjugateModel::new(2.0, 0.5, vec![1.0, 2.0, 0.0]).unwrap();
        let adapted = LangevinAdapter::new(&m);
        assert_eq!(
            adapted.exact_mode().unwrap().as_scalar(),
            m.exact_posterior().0
        );
        assert_eq!(adapted.stability_limit(), Some(1.0 / m.drift_a()));
    }
}
