//! Stochastic gradient estimators: full gradient, naive subsampling, and
//! control-variate subsampling anchored at the posterior mode.
//!
//! All estimators are unbiased for the full gradient at every point. Cost
//! is charged in per-datum gradient evaluations: N per full gradient, n per
//! subsampled gradient, plus a one-time N for the control-variate anchor
//! precomputation (kept in a separate ledger field).

use crate::models::{find_mode, ModelError, ParamVector, PosteriorModel};
use crate::rng::{RngStream, SubsampleError, SubsetSampler};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GradientError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Subsample(#[from] SubsampleError),
    #[error("anchor gradient norm {grad_norm:.3e} exceeds quality bound {bound:.3e}")]
    AnchorQuality { grad_norm: f64, bound: f64 },
}

/// Evaluation counters. `term_evals` counts per-datum gradient evaluations
/// during sampling; anchor setup is charged to `precompute_term_evals`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CostLedger {
    pub term_evals: u64,
    pub precompute_term_evals: u64,
    pub steps: u64,
    pub noise_draws: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn merge(&mut self, other: &CostLedger) {
        self.term_evals += other.term_evals;
        self.precompute_term_evals += other.precompute_term_evals;
        self.steps += other.steps;
        self.noise_draws += other.noise_draws;
    }

    /// Total per-datum evaluations including precompute.
    pub fn total_term_evals(&self) -> u64 {
        self.term_evals + self.precompute_term_evals
    }
}

/// A ready-to-run gradient scheme. Control-variate state (anchor point and
/// per-term anchor gradients) is precomputed once via [`precompute_cv`].
#[derive(Debug, Clone)]
pub enum GradientScheme {
    Full,
    NaiveSubsample {
        batch: usize,
    },
    ControlVariate {
        batch: usize,
        anchor: ParamVector,
        anchor_full_grad: ParamVector,
        anchor_term_grads: Vec<ParamVector>,
    },
}

impl GradientScheme {
    /// Per-datum evaluations charged per gradient call.
    pub fn evals_per_step(&self, n_data: usize) -> u64 {
        match self {
            GradientScheme::Full => n_data as u64,
            GradientScheme::NaiveSubsample { batch }
            | GradientScheme::ControlVariate { batch, .. } => *batch as u64,
        }
    }

    pub fn batch(&self) -> Option<usize> {
        match self {
            GradientScheme::Full => None,
            GradientScheme::NaiveSubsample { batch }
            | GradientScheme::ControlVariate { batch, .. } => Some(*batch),
        }
    }

    pub fn label(&self) -> String {
        match self {
            GradientScheme::Full => "full".into(),
            GradientScheme::NaiveSubsample { batch } => format!("naive-{batch}"),
            GradientScheme::ControlVariate { batch, .. } => format!("cv-{batch}"),
        }
    }
}

/// Build a control-variate scheme anchored at the posterior mode.
///
/// Charges N per-term evaluations to `ledger.precompute_term_evals` (the
/// mode search itself uses full gradients whose count is model-dependent
/// and excluded by convention). Fails if the anchor is not close enough to
/// a stationary point: a sloppy anchor silently destroys the variance
/// reduction, so it is rejected up front.
pub fn precompute_cv(
    model: &dyn PosteriorModel,
    batch: usize,
    mode_tol: f64,
    ledger: &mut CostLedger,
) -> Result<GradientScheme, GradientError> {
    let n_data = model.data_len();
    if batch < 1 || batch > n_data {
        return Err(SubsampleError::BatchOutOfRange { n: batch, total: n_data }.into());
    }
    let anchor = find_mode(model, mode_tol, 200)?;
    let anchor_full_grad = model.full_grad(&anchor)?;
    let bound = 100.0 * mode_tol;
    if anchor_full_grad.norm() > bound {
        return Err(GradientError::AnchorQuality {
            grad_norm: anchor_full_grad.norm(),
            bound,
        });
    }
    let anchor_term_grads: Vec<ParamVector> = (0..n_data)
        .map(|i| model.term_potential_grad(i, &anchor))
        .collect::<Result<_, _>>()?;
    ledger.precompute_term_evals += n_data as u64;
    Ok(GradientScheme::ControlVariate { batch, anchor, anchor_full_grad, anchor_term_grads })
}

/// One draw of the (possibly stochastic) gradient estimate at `x`.
pub fn estimate_gradient(
    model: &dyn PosteriorModel,
    scheme: &GradientScheme,
    x: &ParamVector,
    subsets: &mut SubsetSampler,
    rng: &mut RngStream,
    ledger: &mut CostLedger,
) -> Result<ParamVector, GradientError> {
    let n_data = model.data_len();
    ledger.term_evals += scheme.evals_per_step(n_data);
    match scheme {
        GradientScheme::Full => Ok(model.full_grad(x)?),
        GradientScheme::NaiveSubsample { batch } => {
            let scale = n_data as f64 / *batch as f64;
            let mut g = model.grad_log_prior(x)?;
            for &i in subsets.draw(*batch, rng)? {
                g.add_scaled(scale, &model.grad_log_lik_term(i, x)?);
            }
            Ok(g)
        }
        GradientScheme::ControlVariate { batch, anchor_full_grad, anchor_term_grads, .. } => {
            let scale = n_data as f64 / *batch as f64;
            let mut g = anchor_full_grad.clone();
            for &i in subsets.draw(*batch, rng)? {
                let term = model.term_potential_grad(i, x)?;
                g.add_scaled(scale, &term.sub(&anchor_term_grads[i]));
            }
            Ok(g)
        }
    }
}

/// Exact mean and scalar variance (trace of the covariance) of the gradient
/// estimator at `x`, by exhaustive subset enumeration. Guarded at N <= 20.
pub fn gradient_moments_exact(
    model: &dyn PosteriorModel,
    scheme: &GradientScheme,
    x: &ParamVector,
) -> Result<(ParamVector, f64), GradientError> {
    let n_data = model.data_len();
    match scheme {
        GradientScheme::Full => Ok((model.full_grad(x)?, 0.0)),
        GradientScheme::NaiveSubsample { batch } => {
            let terms: Vec<Vec<f64>> = (0..n_data)
                .map(|i| model.grad_log_lik_term(i, x).map(ParamVector::into_vec))
                .collect::<Result<_, _>>()?;
            let (mean_sum, var) = crate::rng::enumerate_subsample_moments(&terms, *batch)?;
            let mut mean = model.grad_log_prior(x)?;
            mean.add_scaled(1.0, &ParamVector::new(mean_sum)?);
            Ok((mean, var))
        }
        GradientScheme::ControlVariate { batch, anchor_full_grad, anchor_term_grads, .. } => {
            let diffs: Vec<Vec<f64>> = (0..n_data)
                .map(|i| {
                    model
                        .term_potential_grad(i, x)
                        .map(|t| t.sub(&anchor_term_grads[i]).into_vec())
                })
                .collect::<Result<_, _>>()?;
            let (mean_sum, var) = crate::rng::enumerate_subsample_moments(&diffs, *batch)?;
            let mut mean = anchor_full_grad.clone();
            mean.add_scaled(1.0, &ParamVector::new(mean_sum)?);
            Ok((mean, var))
        }
    }
}

/// Monte Carlo estimate of the gradient estimator's mean and scalar
/// variance at `x` over `reps` independent subset draws.
pub fn gradient_moments_mc(
    model: &dyn PosteriorModel,
    scheme: &GradientScheme,
    x: &ParamVector,
    reps: usize,
    rng: &mut RngStream,
) -> Result<(ParamVector, f64), GradientError> {
    assert!(reps >= 2);
    let mut subsets = SubsetSampler::new(model.data_len());
    let mut ledger = CostLedger::new();
    let draws: Vec<ParamVector> = (0..reps)
        .map(|_| estimate_gradient(model, scheme, x, &mut subsets, rng, &mut ledger))
        .collect::<Result<_, _>>()?;
    let d = model.dim();
    let mut mean = ParamVector::zeros(d);
    for g in &draws {
        mean.add_scaled(1.0 / reps as f64, g);
    }
    let var = draws
        .iter()
        .map(|g| {
            let dev = g.sub(&mean);
            dev.dot(&dev)
        })
        .sum::<f64>()
        / (reps - 1) as f64;
    Ok((mean, var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{generate_logreg_data, GaussianConjugateModel};
    use crate::oracle::oracle_var_b;

    fn gaussian(n: usize) -> GaussianConjugateModel {
        let data: Vec<f64> = (0..n).map(|i| (i as f64 * 0.61).sin() * 2.0).collect();
        GaussianConjugateModel::new(1.3, 0.9, data).unwrap()
    }

    #[test]
    fn all_schemes_unbiased_by_enumeration() {
        for n_data in [4usize, 8, 12] {
            let models: Vec<Box<dyn PosteriorModel>> = vec![
                Box::new(gaussian(n_data)),
                Box::new(generate_logreg_data(2, n_data, 5.0, 3).unwrap()),
            ];
            for model in models {
                let exact = model
                    .full_grad(&ParamVector::new(vec![0.4; model.dim()]).unwrap())
                    .unwrap();
                let x = ParamVector::new(vec![0.4; model.dim()]).unwrap();
                let mut ledger = CostLedger::new();
                let mut schemes = vec![GradientScheme::Full];
                for batch in [1, 2, n_data] {
                    schemes.push(GradientScheme::NaiveSubsample { batch });
                    schemes
                        .push(precompute_cv(model.as_ref(), batch, 1e-10, &mut ledger).unwrap());
                }
                for scheme in schemes {
                    let (mean, var) = gradient_moments_exact(model.as_ref(), &scheme, &x).unwrap();
                    assert!(
                        mean.distance(&exact) <= 1e-12 * exact.norm().max(1.0),
                        "{} biased: {:?} vs {:?}",
                        scheme.label(),
                        mean,
                        exact
                    );
                    assert!(var >= -1e-15);
                    if scheme.batch() == Some(n_data) {
                        assert!(var.abs() <= 1e-12, "full batch must be deterministic");
                    }
                }
            }
        }
    }

    #[test]
    fn naive_variance_matches_var_b_formula() {
        // Gaussian naive estimator is -A x + B_tau; its variance over
        // subsets is Var(B) and does not depend on x.
        for n_data in 2..=12usize {
            let m = gaussian(n_data);
            for batch in 1..=n_data {
                let scheme = GradientScheme::NaiveSubsample { batch };
                for x in [-1.5, 0.0, 2.0] {
                    let (_, var) =
                        gradient_moments_exact(&m, &scheme, &ParamVector::scalar(x)).unwrap();
                    let formula = oracle_var_b(m.data(), m.sigma_y_sq(), batch).unwrap();
                    assert!(
                        (var - formula).abs() <= 1e-12 * formula.max(1.0),
                        "N={n_data} n={batch}: {var} vs {formula}"
                    );
                }
            }
        }
    }

    #[test]
    fn cv_variance_zero_at_anchor() {
        let models: Vec<Box<dyn PosteriorModel>> = vec![
            Box::new(gaussian(10)),
            Box::new(generate_logreg_data(3, 15, 10.0, 9).unwrap()),
        ];
        for model in models {
            let mut ledger = CostLedger::new();
            let scheme = precompute_cv(model.as_ref(), 2, 1e-10, &mut ledger).unwrap();
            let GradientScheme::ControlVariate { ref anchor, .. } = scheme else {
                unreachable!()
            };
            let (mean, var) = gradient_moments_exact(model.as_ref(), &scheme, anchor).unwrap();
            assert!(var <= 1e-18, "variance at anchor: {var}");
            assert!(mean.norm() <= 1e-8);
        }
    }

    #[test]
    fn cv_variance_zero_everywhere_for_gaussian() {
        // Per-term gradient differences are identical across i for the
        // conjugate Gaussian, so the CV estimator is deterministic at every
        // point, not just at the anchor.
        let m = gaussian(12);
        let mut ledger = CostLedger::new();
        let scheme = precompute_cv(&m, 3, 1e-10, &mut ledger).unwrap();
        for x in [-2.0, 0.1, 1.7] {
            let p = ParamVector::scalar(x);
            let (mean, var) = gradient_moments_exact(&m, &scheme, &p).unwrap();
            assert!(var <= 1e-20, "gaussian cv variance at {x}: {var}");
            let full = m.full_grad(&p).unwrap();
            assert!(mean.distance(&full) <= 1e-12);
        }
    }

    #[test]
    fn cv_variance_small_near_anchor_for_logistic() {
        let m = generate_logreg_data(3, 15, 10.0, 9).unwrap();
        let mut ledger = CostLedger::new();
        let scheme = precompute_cv(&m, 2, 1e-10, &mut ledger).unwrap();
        let GradientScheme::ControlVariate { ref anchor, .. } = scheme else { unreachable!() };
        let naive = GradientScheme::NaiveSubsample { batch: 2 };
        // Within a small ball around the anchor the CV variance is far below
        // the naive one.
        for delta in [0.01, 0.05] {
            let mut x = anchor.clone();
            x.add_scaled(delta, &ParamVector::new(vec![1.0, -1.0, 0.5]).unwrap());
            let (_, var_cv) = gradient_moments_exact(&m, &scheme, &x).unwrap();
            let (_, var_naive) = gradient_moments_exact(&m, &naive, &x).unwrap();
            assert!(var_cv < 0.01 * var_naive, "cv {var_cv} vs naive {var_naive}");
        }
    }

    #[test]
    fn mc_moments_agree_with_enumeration() {
        let m = generate_logreg_data(2, 10, 5.0, 4).unwrap();
        let scheme = GradientScheme::NaiveSubsample { batch: 3 };
        let x = ParamVector::new(vec![0.3, -0.2]).unwrap();
        let (mean_e, var_e) = gradient_moments_exact(&m, &scheme, &x).unwrap();
        let mut rng = RngStream::new(8, 0);
        let (mean_mc, var_mc) = gradient_moments_mc(&m, &scheme, &x, 200_000, &mut rng).unwrap();
        assert!(mean_mc.distance(&mean_e) < 0.01);
        assert!((var_mc - var_e).abs() < 0.05 * var_e.max(0.1));
    }

    #[test]
    fn cost_accounting_is_exact() {
        let m = gaussian(50);
        let x = ParamVector::scalar(0.2);
        let mut rng = RngStream::new(5, 0);
        let mut subsets = SubsetSampler::new(50);
        let k = 37;

        let mut ledger = CostLedger::new();
        for _ in 0..k {
            estimate_gradient(&m, &GradientScheme::Full, &x, &mut subsets, &mut rng, &mut ledger)
                .unwrap();
        }
        assert_eq!(ledger.term_evals, k * 50);

        let mut ledger = CostLedger::new();
        let naive = GradientScheme::NaiveSubsample { batch: 7 };
        for _ in 0..k {
            estimate_gradient(&m, &naive, &x, &mut subsets, &mut rng, &mut ledger).unwrap();
        }
        assert_eq!(ledger.term_evals, k * 7);

        let mut ledger = CostLedger::new();
        let cv = precompute_cv(&m, 7, 1e-10, &mut ledger).unwrap();
        assert_eq!(ledger.precompute_term_evals, 50);
        for _ in 0..k {
            estimate_gradient(&m, &cv, &x, &mut subsets, &mut rng, &mut ledger).unwrap();
        }
        assert_eq!(ledger.term_evals, k * 7);
        assert_eq!(ledger.total_term_evals(), k * 7 + 50);
    }

    #[test]
    fn rejects_bad_batch() {
        let m = gaussian(5);
        let mut ledger = CostLedger::new();
        assert!(precompute_cv(&m, 0, 1e-10, &mut ledger).is_err());
        assert!(precompute_cv(&m, 6, 1e-10, &mut ledger).is_err());
    }
}
