//! Bayesian logistic regression with a synthetic-data generator.
//!
//! Gradients are in the plain Langevin convention: the full gradient is
//! `grad log posterior`, paired with `sqrt(2h)` noise in the sampler.

use super::{ModelError, ParamVector, PosteriorModel};
use crate::rng::RngStream;
use nalgebra::DMatrix;

/// Numerically stable logistic function, branch split on the sign of z.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(z)) without overflow.
fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone)]
pub struct LogisticRegressionModel {
    covariates: Vec<f64>, // row-major N x d
    labels: Vec<u8>,
    dim: usize,
    prior_variance: f64,
}

impl LogisticRegressionModel {
    pub fn new(
        covariates: Vec<Vec<f64>>,
        labels: Vec<u8>,
        prior_variance: f64,
    ) -> Result<Self, ModelError> {
        if !(prior_variance > 0.0) || !prior_variance.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "prior_variance must be positive, got {prior_variance}"
            )));
        }
        if covariates.is_empty() {
            return Err(ModelError::InvalidParameter("need at least one datum".into()));
        }
        if covariates.len() != labels.len() {
            return Err(ModelError::InvalidParameter(format!(
                "covariate rows ({}) and labels ({}) differ",
                covariates.len(),
                labels.len()
            )));
        }
        let dim = covariates[0].len();
        if dim == 0 {
            return Err(ModelError::InvalidParameter("zero-dimensional covariates".into()));
        }
        let mut flat = Vec::with_capacity(covariates.len() * dim);
        for row in &covariates {
            if row.len() != dim {
                return Err(ModelError::InvalidParameter("ragged covariate matrix".into()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite);
            }
            flat.extend_from_slice(row);
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(ModelError::InvalidParameter("labels must be 0 or 1".into()));
        }
        Ok(Self { covariates: flat, labels, dim, prior_variance })
    }

    pub fn prior_variance(&self) -> f64 {
        self.prior_variance
    }

    pub fn covariate_row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    fn logit(&self, i: usize, w: &[f64]) -> f64 {
        self.covariate_row(i).iter().zip(w).map(|(x, w)| x * w).sum()
    }

    /// Conservative closed-form stability limit: h < 2 m / M^2 with
    /// m = prior curvature and M bounded via s' <= 1/4.
    pub fn conservative_stability_limit(&self) -> f64 {
        let n = self.labels.len();
        let mut gram = DMatrix::<f64>::zeros(self.dim, self.dim);
        for i in 0..n {
            let row = self.covariate_row(i);
            for a in 0..self.dim {
                for b in 0..self.dim {
                    gram[(a, b)] += row[a] * row[b];
                }
            }
        }
        let lambda_max = gram
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max);
        let m = 1.0 / self.prior_variance;
        let big_m = m + 0.25 * lambda_max;
        2.0 * m / (big_m * big_m)
    }
}

impl PosteriorModel for LogisticRegressionModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn data_len(&self) -> usize {
        self.labels.len()
    }

    fn grad_log_prior(&self, x: &ParamVector) -> Result<ParamVector, ModelError> {
        self.check_dim(x)?;
        Ok(x.scaled(-1.0 / self.prior_variance))
    }

    fn grad_log_lik_term(&self, i: usize, x: &ParamVector) -> Result<ParamVector, ModelError> {
        self.check_dim(x)?;
        self.check_index(i)?;
        let resid = self.labels[i] as f64 - sigmoid(self.logit(i, x.as_slice()));
        let g = self.covariate_row(i).iter().map(|v| resid * v).collect();
        Ok(ParamVector::new(g)?)
    }

    fn full_grad(&self, x: &ParamVector) -> Result<ParamVector, ModelError> {
        self.check_dim(x)?;
        let w = x.as_slice();
        let mut g: Vec<f64> = w.iter().map(|wj| -wj / self.prior_variance).collect();
        for i in 0..self.labels.len() {
            let resid = self.labels[i] as f64 - sigmoid(self.logit(i, w));
            for (gj, xj) in g.iter_mut().zip(self.covariate_row(i)) {
                *gj += resid * xj;
            }
        }
        Ok(ParamVector::new(g)?)
    }

    fn log_posterior(&self, x: &ParamVector) -> f64 {
        let w = x.as_slice();
        let prior = -w.iter().map(|wj| wj * wj).sum::<f64>() / (2.0 * self.prior_variance);
        let mut lik = 0.0;
        for i in 0..self.labels.len() {
            let z = self.logit(i, w);
            lik += self.labels[i] as f64 * z - log1p_exp(z);
        }
        prior + lik
    }

    fn log_prior(&self, x: &ParamVector) -> f64 {
        let w = x.as_slice();
        -w.iter().map(|wj| wj * wj).sum::<f64>() / (2.0 * self.prior_variance)
    }

    fn log_lik_term(&self, i: usize, x: &ParamVector) -> f64 {
        let z = self.logit(i, x.as_slice());
        self.labels[i] as f64 * z - log1p_exp(z)
    }

    fn hessian(&self, x: &ParamVector) -> DMatrix<f64> {
        let w = x.as_slice();
        let mut h = DMatrix::from_diagonal_element(self.dim, self.dim, -1.0 / self.prior_variance);
        for i in 0..self.labels.len() {
            let s = sigmoid(self.logit(i, w));
            let weight = s * (1.0 - s);
            let row = self.covariate_row(i);
            for a in 0..self.dim {
                for b in 0..self.dim {
                    h[(a, b)] -= weight * row[a] * row[b];
                }
            }
        }
        h
    }

    fn prior_hessian(&self, _x: &ParamVector) -> DMatrix<f64> {
        DMatrix::from_diagonal_element(self.dim, self.dim, -1.0 / self.prior_variance)
    }

    fn lik_term_hessian(&self, i: usize, x: &ParamVector) -> DMatrix<f64> {
        let s = sigmoid(self.logit(i, x.as_slice()));
        let weight = s * (1.0 - s);
        let row = self.covariate_row(i);
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for a in 0..self.dim {
            for b in 0..self.dim {
                h[(a, b)] = -weight * row[a] * row[b];
            }
        }
        h
    }
}

/// Synthetic logistic-regression dataset, a pure function of
/// (d, n_data, prior_variance, seed).
///
/// Covariate means mu_i ~ U[0,1], covariance P = C C^T with
/// C_ij ~ U[-1,1], rows x ~ N(mu, P), weights w_j ~ N(0, prior_variance),
/// labels y ~ Bernoulli(s(w.x)). No intercept term.
pub fn generate_logreg_data(
    d: usize,
    n_data: usize,
    prior_variance: f64,
    seed: u64,
) -> Result<LogisticRegressionModel, ModelError> {
    if d < 1 || n_data < 1 {
        return Err(ModelError::InvalidParameter(format!(
            "d and n_data must be >= 1, got d={d}, n_data={n_data}"
        )));
    }
    if !(prior_variance > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "prior_variance must be positive, got {prior_variance}"
        )));
    }
    let mut rng = RngStream::new(seed, 0);
    let mu: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
    // Row-major factor C; x = mu + C z gives x ~ N(mu, C C^T) exactly.
    let c: Vec<f64> = (0..d * d).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
    let weights: Vec<f64> = (0..d)
        .map(|_| rng.standard_normal() * prior_variance.sqrt())
        .collect();
    let mut covariates = Vec::with_capacity(n_data);
    let mut labels = Vec::with_capacity(n_data);
    for _ in 0..n_data {
        let z = rng.gaussian_noise(d);
        let mut x = mu.clone();
        for a in 0..d {
            for b in 0..d {
                x[a] += c[a * d + b] * z[b];
            }
        }
        let logit: f64 = weights.iter().zip(&x).map(|(w, v)| w * v).sum();
        let y = if rng.uniform() < sigmoid(logit) { 1u8 } else { 0u8 };
        covariates.push(x);
        labels.push(y);
    }
    LogisticRegressionModel::new(covariates, labels, prior_variance)
}
