//! Closed-form ground truth for the Gaussian toy model.
//!
//! Everything here lives in the rescaled drift convention: the chain is
//! `theta_{k+1} = (1 - A h) theta_k + B_k h + sqrt(h) xi_k` with
//! `A = (1/2)(1/sigma_theta_sq + N/sigma_y_sq)` and B the subsampled drift
//! intercept. The adapter between this convention and the plain Langevin
//! one sits in the sampler module, never here.
//!
//! The per-step variance recursion is treated as authoritative for finite
//! step counts; the bundled closed form is recovered in the M -> infinity
//! limit (the two differ in how the initial variance decays at finite M).

use crate::scalar::Scalar;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("invalid oracle input: {0}")]
    Invalid(String),
    #[error("subsampling variance undefined: N < 2 with n < N")]
    DegenerateVariance,
}

/// Inputs for the analytic bias/variance/MSE recursions.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OracleInputs<S> {
    /// Drift slope A > 0.
    pub drift_a: S,
    /// Mean of the drift intercept, E B.
    pub mean_b: S,
    /// Variance of the drift intercept over subsets (0 for full gradients).
    pub var_b: S,
    /// Stepsize, 0 < h < 1/A.
    pub h: S,
    pub theta0_mean: S,
    pub theta0_var: S,
    /// Step count M.
    pub steps: usize,
    /// Path count P.
    pub paths: usize,
}

impl<S: Scalar> OracleInputs<S> {
    pub fn validate(&self) -> Result<(), OracleError> {
        let ok = self.drift_a > S::zero()
            && self.h > S::zero()
            && self.h < S::one() / self.drift_a
            && self.var_b >= S::zero()
            && self.theta0_var >= S::zero()
            && self.paths >= 1;
        if ok {
            Ok(())
        } else {
            Err(OracleError::Invalid(format!("{self:?}")))
        }
    }

    fn contraction(&self) -> S {
        S::one() - self.drift_a * self.h
    }
}

/// Subsampling variance of B: (1/(4 sigma_y^4)) * (N(N-n)/n) * Var(y),
/// with Var(y) the unbiased empirical variance of the data.
pub fn oracle_var_b(data: &[f64], sigma_y_sq: f64, n: usize) -> Result<f64, OracleError> {
    let total = data.len();
    if n < 1 || n > total {
        return Err(OracleError::Invalid(format!("n = {n} out of range for N = {total}")));
    }
    if n == total {
        return Ok(0.0);
    }
    if total < 2 {
        return Err(OracleError::DegenerateVariance);
    }
    let var_y = crate::scalar::sample_variance(data);
    let nf = total as f64;
    Ok(var_y * nf * (nf - n as f64) / (n as f64 * 4.0 * sigma_y_sq * sigma_y_sq))
}

/// |E theta_M - mu_p| = (1 - A h)^M |theta0_mean - E B / A|.
pub fn oracle_bias<S: Scalar>(inputs: &OracleInputs<S>) -> S {
    let base = (inputs.theta0_mean - inputs.mean_b / inputs.drift_a).abs();
    inputs.contraction().powi(inputs.steps as i32) * base
}

/// Var(theta_M) by iterating Var_{k+1} = (1-Ah)^2 Var_k + h + h^2 Var(B).
pub fn oracle_variance<S: Scalar>(inputs: &OracleInputs<S>) -> S {
    let beta_sq = inputs.contraction() * inputs.contraction();
    let increment = inputs.h + inputs.h * inputs.h * inputs.var_b;
    // Closed form of the affine recursion; exact for every M.
    let decay = beta_sq.powi(inputs.steps as i32);
    let stationary = increment / (S::one() - beta_sq);
    stationary * (S::one() - decay) + decay * inputs.theta0_var
}

/// Stationary variance V_inf(h) = (1 + h Var(B)) / (2A - A^2 h).
pub fn oracle_stationary_variance<S: Scalar>(drift_a: S, h: S, var_b: S) -> S {
    (S::one() + h * var_b) / ((S::one() + S::one()) * drift_a - drift_a * drift_a * h)
}

/// MSE of the P-path mean estimator: bias^2 + Var(theta_M)/P.
pub fn oracle_mse<S: Scalar>(inputs: &OracleInputs<S>) -> S {
    let bias = oracle_bias(inputs);
    bias * bias + oracle_variance(inputs) / S::of_usize(inputs.paths)
}

/// Stationary bias of the variance estimator, plain and Richardson-Romberg
/// extrapolated (2 V(h/2) - V(h)), both relative to the exact posterior
/// variance 1/(2A).
///
/// `var_b` is the intercept variance at stepsize `h`. The extrapolation
/// pair keeps the per-unit-time gradient budget constant: the half-step
/// chain runs at half the batch, so its intercept variance is 2 var_b and
/// the product h' Var(B) stays fixed at h var_b for both chains. That is
/// why the subsampling part of the bias survives extrapolation (O(h var_b))
/// while the discretisation part improves from O(h) to O(h^2).
pub fn oracle_rr_variance_bias<S: Scalar>(drift_a: S, h: S, var_b: S) -> (S, S) {
    let two = S::one() + S::one();
    let target = S::one() / (two * drift_a);
    let numerator = S::one() + h * var_b;
    let v_at = |step: S| numerator / (two * drift_a - drift_a * drift_a * step);
    let v_h = v_at(h);
    let v_half = v_at(h / two);
    (v_h - target, two * v_half - v_h - target)
}
