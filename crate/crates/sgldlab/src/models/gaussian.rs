//! Conjugate Gaussian toy model.
//!
//! Prior N(0, sigma_theta_sq), observations y_i | theta ~ N(theta,
//! sigma_y_sq). Gradients are in the rescaled drift convention: the full
//! gradient is `-A*x + B` with A = (1/2)(1/sigma_theta_sq + N/sigma_y_sq)
//! and B = sum(y)/(2 sigma_y_sq), to be paired with unit diffusion
//! (`sqrt(h)` noise) in the sampler.

use super::{ModelError, ParamVector, PosteriorModel};
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct GaussianConjugateModel {
    sigma_theta_sq: f64,
    sigma_y_sq: f64,
    data: Vec<f64>,
    sum_y: f64,
}

impl GaussianConjugateModel {
    pub fn new(sigma_theta_sq: f64, sigma_y_sq: f64, data: Vec<f64>) -> Result<Self, ModelError> {
        if !(sigma_theta_sq > 0.0) || !sigma_theta_sq.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "sigma_theta_sq must be positive, got {sigma_theta_sq}"
            )));
        }
        if !(sigma_y_sq > 0.0) || !sigma_y_sq.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "sigma_y_sq must be positive, got {sigma_y_sq}"
            )));
        }
        if data.is_empty() {
            return Err(ModelError::InvalidParameter("need at least one observation".into()));
        }
        if data.iter().any(|y| !y.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        let sum_y = crate::scalar::compensated_sum(data.iter().copied());
        Ok(Self { sigma_theta_sq, sigma_y_sq, data, sum_y })
    }

    pub fn sigma_theta_sq(&self) -> f64 {
        self.sigma_theta_sq
    }

    pub fn sigma_y_sq(&self) -> f64 {
        self.sigma_y_sq
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn sum_y(&self) -> f64 {
        self.sum_y
    }

    /// Drift slope A = (1/2)(1/sigma_theta_sq + N/sigma_y_sq).
    pub fn drift_a(&self) -> f64 {
        0.5 * (1.0 / self.sigma_theta_sq + self.data.len() as f64 / self.sigma_y_sq)
    }

    /// Full-data drift intercept B = sum(y) / (2 sigma_y_sq).
    pub fn drift_b(&self) -> f64 {
        self.sum_y / (2.0 * self.sigma_y_sq)
    }

    /// Exact posterior (mean, variance) from conjugacy.
    pub fn exact_posterior(&self) -> (f64, f64) {
        let n = self.data.len() as f64;
        let mean = self.sum_y / (self.sigma_y_sq / self.sigma_theta_sq + n);
        let variance = 1.0 / (1.0 / self.sigma_theta_sq + n / self.sigma_y_sq);
        (mean, variance)
    }
}

/// Synthetic observations y_i ~ N(mean, sigma_y_sq), a pure function of
/// (n_data, mean, sigma_y_sq, seed).
pub fn generate_gaussian_data(n_data: usize, mean: f64, sigma_y_sq: f64, seed: u64) -> Vec<f64> {
    assert!(n_data >= 1 && sigma_y_sq > 0.0);
    let sd = sigma_y_sq.sqrt();
    let mut rng = crate::rng::RngStream::new(seed, 0);
    (0..n_data).map(|_| mean + sd * rng.standard_normal()).collect()
}

impl PosteriorModel for GaussianConjugateModel {
    fn dim(&self) -> usize {
        1
    }

    fn data_len(&self) -> usize {
        self.data.len()
    }

    fn grad_log_prior(&self, x: &ParamVector) -> Result<ParamVector, ModelError> {
        self.check_dim(x)?;
        Ok(ParamVector::scalar(-x.as_scalar() / (2.0 * self.sigma_theta_sq)))
    }

    fn grad_log_lik_term(&self, i: usize, x: &ParamVector) -> Result<ParamVector, ModelError> {
        self.check_dim(x)?;
        self.check_index(i)?;
        Ok(ParamVector::scalar((self.data[i] - x.as_scalar()) / (2.0 * self.sigma_y_sq)))
    }

    fn full_grad(&self, x: &ParamVector) -> Result<ParamVector, ModelError> {
        self.check_dim(x)?;
        Ok(ParamVector::scalar(-self.drift_a() * x.as_scalar() + self.drift_b()))
    }

    fn log_posterior(&self, x: &ParamVector) -> f64 {
        // Potential with gradient -A*x + B (constants dropped).
        let t = x.as_scalar();
        -0.5 * self.drift_a() * t * t + self.drift_b() * t
    }

    fn log_prior(&self, x: &ParamVector) -> f64 {
        let t = x.as_scalar();
        -t * t / (4.0 * self.sigma_theta_sq)
    }

    fn log_lik_term(&self, i: usize, x: &ParamVector) -> f64 {
        let r = self.data[i] - x.as_scalar();
        -r * r / (4.0 * self.sigma_y_sq)
    }

    fn hessian(&self, _x: &ParamVector) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, -self.drift_a())
    }

    fn prior_hessian(&self, _x: &ParamVector) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, -1.0 / (2.0 * self.sigma_theta_sq))
    }

    fn lik_term_hessian(&self, _i: usize, _x: &ParamVector) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, -1.0 / (2.0 * self.sigma_y_sq))
    }

    fn exact_mode(&self) -> Option<ParamVector> {
        Some(ParamVector::scalar(self.exact_posterior().0))
    }

    fn stability_limit(&self) -> Option<f64> {
        Some(1.0 / self.drift_a())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_gradient_at_mode_is_zero() {
        let m = GaussianConjugateModel::new(1.0, 1.0, vec![1.0]).unwrap();
        let g = m.grad_log_prior(&ParamVector::scalar(0.0)).unwrap();
        assert_eq!(g.as_scalar(), 0.0);
    }

    #[test]
    fn prior_gradient_uses_half_convention() {
        // sigma_theta_sq = 2, x = 4 -> -x/(2*2) = -1.
        let m = GaussianConjugateModel::new(2.0, 1.0, vec![0.0]).unwrap();
        let g = m.grad_log_prior(&ParamVector::scalar(4.0)).unwrap();
        assert_eq!(g.as_scalar(), -1.0);
    }

    #[test]
    fn lik_term_examples() {
        let m = GaussianConjugateModel::new(1.0, 1.0, vec![0.0, 1.0]).unwrap();
        assert_eq!(
            m.grad_log_lik_term(0, &ParamVector::scalar(0.0)).unwrap().as_scalar(),
            0.0
        );
        assert_eq!(
            m.grad_log_lik_term(1, &ParamVector::scalar(0.0)).unwrap().as_scalar(),
            0.5
        );
        assert!(m.grad_log_lik_term(2, &ParamVector::scalar(0.0)).is_err());
    }

    #[test]
    fn full_grad_is_affine_with_slope_minus_a() {
        let m = GaussianConjugateModel::new(1.0, 1.0, vec![1.0]).unwrap();
        // A = 1, B = 0.5.
        assert_eq!(m.full_grad(&ParamVector::scalar(0.0)).unwrap().as_scalar(), 0.5);
        let a = m.drift_a();
        let g = |x: f64| m.full_grad(&ParamVector::scalar(x)).unwrap().as_scalar();
        // Affine through three collinear points.
        let (x0, x1, x2) = (-1.0, 0.5, 2.0);
        let slope01 = (g(x1) - g(x0)) / (x1 - x0);
        let slope12 = (g(x2) - g(x1)) / (x2 - x1);
        assert!((slope01 + a).abs() < 1e-14);
        assert!((slope12 + a).abs() < 1e-14);
    }

    #[test]
    fn gradient_vanishes_at_posterior_mode() {
        let m = GaussianConjugateModel::new(2.0, 3.0, vec![1.0, 2.0, 3.0]).unwrap();
        let (mean, var) = m.exact_posterior();
        assert!((mean - 4.0 / 3.0).abs() < 1e-14);
        assert!((var - 2.0 / 3.0).abs() < 1e-14);
        let g = m.full_grad(&ParamVector::scalar(mean)).unwrap();
        assert!(g.as_scalar().abs() < 1e-14);
    }

    #[test]
    fn posterior_variance_is_inverse_2a() {
        let m = GaussianConjugateModel::new(0.7, 2.3, (0..50).map(|i| i as f64 * 0.1).collect()).unwrap();
        let (_, var) = m.exact_posterior();
        assert!((var - 1.0 / (2.0 * m.drift_a())).abs() <= 1e-14);
    }

    #[test]
    fn symmetric_zero_data() {
        let n = 17;
        let m = GaussianConjugateModel::new(1.0, 1.0, vec![0.0; n]).unwrap();
        let (mean, var) = m.exact_posterior();
        assert_eq!(mean, 0.0);
        assert!((var - 1.0 / (1.0 + n as f64)).abs() < 1e-15);
    }

    #[test]
    fn single_observation_posterior() {
        let m = GaussianConjugateModel::new(1.0, 1.0, vec![1.0]).unwrap();
        assert_eq!(m.exact_posterior(), (0.5, 0.5));
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(GaussianConjugateModel::new(0.0, 1.0, vec![1.0]).is_err());
        assert!(GaussianConjugateModel::new(1.0, -1.0, vec![1.0]).is_err());
        assert!(GaussianConjugateModel::new(1.0, 1.0, vec![]).is_err());
        assert!(GaussianConjugateModel::new(1.0, 1.0, vec![f64::NAN]).is_err());
    }
}
