//! Posterior models: the chain-state vector type, the model abstraction,
//! the conjugate Gaussian toy model and Bayesian logistic regression.
//!
//! Gradient conventions differ per model and are documented on each model
//! type. The Gaussian model works in the rescaled drift convention
//! (`-A*x + B` with unit diffusion and `sqrt(h)` noise) so the analytic
//! oracle formulas apply verbatim; logistic regression works in the plain
//! Langevin convention (`grad log posterior` drift, `sqrt(2h)` noise).
//! The convention is paired with the matching noise scale in the sampler
//! and never mixed within a run.

mod audit;
mod gaussian;
mod io;
mod langevin_adapter;
mod logistic;
mod newton;

pub use audit::{audit_assumptions, ModelAssumptionReport};
pub use gaussian::{generate_gaussian_data, GaussianConjugateModel};
pub use langevin_adapter::LangevinAdapter;
pub use io::{load_gaussian_csv, load_logistic_csv, save_gaussian_csv, save_logistic_csv, DatasetMeta};
pub use logistic::{generate_logreg_data, sigmoid, LogisticRegressionModel};
pub use newton::find_mode;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("non-finite component in parameter vector")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("datum index {index} out of range for N = {total}")]
    IndexOutOfRange { index: usize, total: usize },
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("mode finding did not converge: gradient norm {grad_norm:.3e} after {iters} iterations")]
    ConvergenceFailure {
        iters: usize,
        grad_norm: f64,
        last: ParamVector,
    },
}

/// A point in d-dimensional parameter space (the chain state).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(components: Vec<f64>) -> Result<Self, ModelError> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(Self(components))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn scalar(value: f64) -> Self {
        Self(vec![value])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Sole component of a one-dimensional state.
    pub fn as_scalar(&self) -> f64 {
        debug_assert_eq!(self.0.len(), 1);
        self.0[0]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn components_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// self += c * other
    pub fn add_scaled(&mut self, c: f64, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|a| a * c).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A Bayesian model exposing per-datum log-likelihood gradients, the prior
/// gradient, and enough curvature information for Newton mode finding.
///
/// All operations are pure functions of `(model, arguments)`; models are
/// immutable after construction and safe to share across workers.
pub trait PosteriorModel: Send + Sync {
    fn dim(&self) -> usize;

    /// Number of observations N.
    fn data_len(&self) -> usize;

    /// Gradient of the log prior, in the model's drift convention.
    fn grad_log_prior(&self, x: &ParamVector) -> Result<ParamVector, ModelError>;

    /// Gradient contribution of datum `i`, in the model's drift convention.
    fn grad_log_lik_term(&self, i: usize, x: &ParamVector) -> Result<ParamVector, ModelError>;

    /// Prior gradient plus all per-datum contributions, computed in one pass.
    fn full_grad(&self, x: &ParamVector) -> Result<ParamVector, ModelError>;

    /// Unnormalized log posterior potential U, consistent with the gradients
    /// (finite differences of this match `full_grad`).
    fn log_posterior(&self, x: &ParamVector) -> f64;

    /// Prior part of U (finite differences match `grad_log_prior`).
    fn log_prior(&self, x: &ParamVector) -> f64;

    /// Likelihood contribution of datum `i` to U.
    fn log_lik_term(&self, i: usize, x: &ParamVector) -> f64;

    /// Hessian of U at x.
    fn hessian(&self, x: &ParamVector) -> DMatrix<f64>;

    /// Hessian of the prior part of U.
    fn prior_hessian(&self, x: &ParamVector) -> DMatrix<f64>;

    /// Hessian of the likelihood contribution of datum `i`.
    fn lik_term_hessian(&self, i: usize, x: &ParamVector) -> DMatrix<f64>;

    /// Closed-form posterior mode, when available.
    fn exact_mode(&self) -> Option<ParamVector> {
        None
    }

    /// Closed-form stability limit on the stepsize, when available.
    fn stability_limit(&self) -> Option<f64> {
        None
    }

    fn check_dim(&self, x: &ParamVector) -> Result<(), ModelError> {
        if x.dim() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<(), ModelError> {
        if i >= self.data_len() {
            return Err(ModelError::IndexOutOfRange {
                index: i,
                total: self.data_len(),
            });
        }
        Ok(())
    }

    /// Per-datum potential gradient with the prior split evenly across terms:
    /// U_i = (1/N) log prior + log lik_i, so sum_i grad U_i = full_grad and
    /// grad U vanishes exactly at the posterior mode.
    fn term_potential_grad(&self, i: usize, x: &ParamVector) -> Result<ParamVector, ModelError> {
        let mut g = self.grad_log_prior(x)?.scaled(1.0 / self.data_len() as f64);
        let lik = self.grad_log_lik_term(i, x)?;
        g.add_scaled(1.0, &lik);
        Ok(g)
    }

    /// Hessian of U_i with the same prior split.
    fn term_potential_hessian(&self, i: usize, x: &ParamVector) -> DMatrix<f64> {
        self.prior_hessian(x) / self.data_len() as f64 + self.lik_term_hessian(i, x)
    }

    /// Value of U_i with the same prior split.
    fn term_potential_value(&self, i: usize, x: &ParamVector) -> f64 {
        self.log_prior(x) / self.data_len() as f64 + self.log_lik_term(i, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn finite_difference_grad(
        model: &dyn PosteriorModel,
        x: &ParamVector,
        step: f64,
    ) -> ParamVector {
        let mut g = Vec::with_capacity(x.dim());
        for j in 0..x.dim() {
            let mut xp = x.as_slice().to_vec();
            let mut xm = x.as_slice().to_vec();
            xp[j] += step;
            xm[j] -= step;
            let fp = model.log_posterior(&ParamVector::new(xp).unwrap());
            let fm = model.log_posterior(&ParamVector::new(xm).unwrap());
            g.push((fp - fm) / (2.0 * step));
        }
        ParamVector::new(g).unwrap()
    }

    fn models_for_test() -> Vec<Box<dyn PosteriorModel>> {
        let data: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let gauss = GaussianConjugateModel::new(1.5, 0.8, data).unwrap();
        let logreg = generate_logreg_data(3, 40, 10.0, 7).unwrap();
        vec![Box::new(gauss), Box::new(logreg)]
    }

    #[test]
    fn full_grad_equals_sum_of_terms() {
        let mut rng = RngStream::new(21, 0);
        for model in models_for_test() {
            for _ in 0..100 {
                let x = ParamVector::new(
                    (0..model.dim()).map(|_| rng.uniform_in(-2.0, 2.0)).collect(),
                )
                .unwrap();
                let full = model.full_grad(&x).unwrap();
                let mut acc = model.grad_log_prior(&x).unwrap();
                for i in 0..model.data_len() {
                    acc.add_scaled(1.0, &model.grad_log_lik_term(i, &x).unwrap());
                }
                let scale = full.norm().max(1.0);
                assert!(
                    full.distance(&acc) / scale <= 1e-12,
                    "sum-of-terms mismatch: {:?} vs {:?}",
                    full,
                    acc
                );
            }
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = RngStream::new(33, 0);
        for model in models_for_test() {
            for _ in 0..50 {
                let x = ParamVector::new(
                    (0..model.dim()).map(|_| rng.uniform_in(-1.5, 1.5)).collect(),
                )
                .unwrap();
                let g = model.full_grad(&x).unwrap();
                let fd = finite_difference_grad(model.as_ref(), &x, 1e-6);
                let scale = g.norm().max(1e-3);
                assert!(
                    g.distance(&fd) / scale <= 1e-5,
                    "finite-difference mismatch: {:?} vs {:?}",
                    g,
                    fd
                );
            }
        }
    }

    #[test]
    fn term_potential_split_sums_to_full_grad() {
        for model in models_for_test() {
            let x = ParamVector::new(vec![0.3; model.dim()]).unwrap();
            let full = model.full_grad(&x).unwrap();
            let mut acc = ParamVector::zeros(model.dim());
            for i in 0..model.data_len() {
                acc.add_scaled(1.0, &model.term_potential_grad(i, &x).unwrap());
            }
            assert!(full.distance(&acc) <= 1e-12 * full.norm().max(1.0));
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let model = GaussianConjugateModel::new(1.0, 1.0, vec![0.0]).unwrap();
        let x = ParamVector::new(vec![0.0, 0.0]).unwrap();
        assert!(model.grad_log_prior(&x).is_err());
        assert!(model.full_grad(&x).is_err());
    }

    #[test]
    fn rejects_non_finite_components() {
        assert!(ParamVector::new(vec![f64::NAN]).is_err());
        assert!(ParamVector::new(vec![f64::INFINITY]).is_err());
    }
}
