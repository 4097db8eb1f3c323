//! Random-walk Metropolis-Hastings reference sampler with burn-in
//! acceptance tuning and a batch-means effective-sample-size estimate.
//!
//! The target is `exp(log_posterior)` of the supplied model, so the model
//! must expose the actual log density. Models in the rescaled half-potential
//! convention (the conjugate Gaussian) must be wrapped in
//! [`crate::models::LangevinAdapter`] first.

use crate::models::{find_mode, ModelError, ParamVector, PosteriorModel};
use crate::rng::RngStream;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MhError {
    #[error("invalid MH configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MhConfig {
    pub steps: usize,
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in state.
    pub thin: usize,
    /// Fixed proposal standard deviation; `None` selects an automatic
    /// curvature-based start that is then tuned during burn-in.
    pub proposal_scale: Option<f64>,
    pub seed: u64,
}

impl MhConfig {
    pub fn validate(&self) -> Result<(), MhError> {
        if self.burn_in >= self.steps {
            return Err(MhError::InvalidConfig(format!(
                "burn_in {} must be < steps {}",
                self.burn_in, self.steps
            )));
        }
        if self.thin < 1 {
            return Err(MhError::InvalidConfig("thin must be >= 1".into()));
        }
        if let Some(s) = self.proposal_scale {
            if !(s > 0.0) {
                return Err(MhError::InvalidConfig(format!("proposal_scale must be > 0, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MhMetadata {
    pub acceptance_rate: f64,
    pub tuned_scale: f64,
    /// Minimum over coordinates of the batch-means ESS.
    pub ess: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MhOutput {
    pub samples: Vec<ParamVector>,
    pub metadata: MhMetadata,
}

/// Effective sample size of a scalar series by batch means with batch
/// length floor(sqrt(len)).
pub fn ess_batch_means(series: &[f64]) -> f64 {
    let n = series.len();
    assert!(n >= 16, "too few samples for batch means");
    let b = (n as f64).sqrt().floor() as usize;
    let k = n / b;
    let used = &series[..k * b];
    let sample_var = crate::scalar::population_variance(used);
    if sample_var == 0.0 {
        return 0.0;
    }
    let batch_means: Vec<f64> =
        used.chunks_exact(b).map(|c| crate::scalar::mean(c)).collect();
    let var_bm = crate::scalar::sample_variance(&batch_means);
    if var_bm == 0.0 {
        return (k * b) as f64;
    }
    // Asymptotic variance estimate b * Var(batch means); ESS = n s^2 / it.
    (used.len() as f64) * sample_var / (b as f64 * var_bm)
}

/// Run the random-walk chain. Deterministic given (model, config).
pub fn mh_sample(model: &dyn PosteriorModel, config: &MhConfig) -> Result<MhOutput, MhError> {
    config.validate()?;
    let d = model.dim();
    let mut rng = RngStream::new(config.seed, 0);

    let start = find_mode(model, 1e-8 * model.data_len().max(1) as f64, 200)
        .unwrap_or_else(|_| ParamVector::zeros(d));
    let mut scale = match config.proposal_scale {
        Some(s) => s,
        None => {
            // 2.38/sqrt(d) times a curvature length scale at the start.
            let hess = model.hessian(&start);
            let mean_curv = hess
                .symmetric_eigenvalues()
                .iter()
                .map(|ev| -ev)
                .fold(0.0f64, f64::max)
                .max(1e-12);
            2.38 / (d as f64).sqrt() / mean_curv.sqrt()
        }
    };

    let mut x = start;
    let mut log_p = model.log_posterior(&x);
    let mut samples = Vec::with_capacity((config.steps - config.burn_in) / config.thin);
    let mut accepted_post = 0u64;
    let mut post_steps = 0u64;
    let mut window_accepts = 0u64;

    for step in 0..config.steps {
        let mut cand = x.clone();
        for c in cand.components_mut() {
            *c += scale * rng.standard_normal();
        }
        let cand_log_p = if cand.is_finite() { model.log_posterior(&cand) } else { f64::NEG_INFINITY };
        let accept = {
            let delta = cand_log_p - log_p;
            delta >= 0.0 || rng.uniform() < delta.exp()
        };
        if accept {
            x = cand;
            log_p = cand_log_p;
        }

        if step < config.burn_in {
            // Acceptance tuning toward [0.2, 0.4], burn-in only.
            if accept {
                window_accepts += 1;
            }
            if (step + 1) % 100 == 0 {
                let rate = window_accepts as f64 / 100.0;
                if rate < 0.2 {
                    scale *= 0.9;
                } else if rate > 0.4 {
                    scale *= 1.1;
                }
                window_accepts = 0;
            }
        } else {
            post_steps += 1;
            if accept {
                accepted_post += 1;
            }
            if (step - config.burn_in) % config.thin == 0 {
                samples.push(x.clone());
            }
        }
    }

    let acceptance_rate = accepted_post as f64 / post_steps.max(1) as f64;
    let ess = (0..d)
        .map(|j| {
            let series: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            ess_batch_means(&series)
        })
        .fold(f64::INFINITY, f64::min);
    let warning = if !(0.05..=0.8).contains(&acceptance_rate) {
        Some(format!(
            "acceptance rate {acceptance_rate:.3} outside [0.05, 0.8] after tuning"
        ))
    } else {
        None
    };

    Ok(MhOutput {
        samples,
        metadata: MhMetadata { acceptance_rate, tuned_scale: scale, ess, warning },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{generate_logreg_data, GaussianConjugateModel, LangevinAdapter};
    use crate::scalar::{mean, population_variance};

    fn gaussian_target() -> GaussianConjugateModel {
        let data: Vec<f64> = (0..100).map(|i| 0.8 + ((i * 13 % 29) as f64 - 14.0) * 0.1).collect();
        GaussianConjugateModel::new(1.0, 1.0, data).unwrap()
    }

    #[test]
    fn config_validation() {
        let bad = MhConfig { steps: 10, burn_in: 10, thin: 1, proposal_scale: None, seed: 1 };
        assert!(bad.validate().is_err());
        let bad = MhConfig { steps: 10, burn_in: 1, thin: 0, proposal_scale: None, seed: 1 };
        assert!(bad.validate().is_err());
        let bad = MhConfig { steps: 10, burn_in: 1, thin: 1, proposal_scale: Some(0.0), seed: 1 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn gaussian_moments_recovered() {
        let m = gaussian_target();
        let target = LangevinAdapter::new(&m);
        let (mu, var_p) = m.exact_posterior();
        let cfg = MhConfig {
            steps: 400_000,
            burn_in: 20_000,
            thin: 5,
            proposal_scale: None,
            seed: 42,
        };
        let out = mh_sample(&target, &cfg).unwrap();
        assert!(out.metadata.warning.is_none(), "{:?}", out.metadata);
        assert!(out.metadata.ess > 1_000.0, "ess {}", out.metadata.ess);
        let xs: Vec<f64> = out.samples.iter().map(|s| s.as_scalar()).collect();
        let m_hat = mean(&xs);
        let v_hat = population_variance(&xs);
        let se = (var_p / out.metadata.ess).sqrt();
        assert!((m_hat - mu).abs() <= 4.0 * se, "mean {m_hat} vs {mu} (se {se})");
        assert!((v_hat - var_p).abs() <= 0.05 * var_p, "var {v_hat} vs {var_p}");
    }

    #[test]
    fn tiny_proposal_accepts_everything() {
        let m = gaussian_target();
        let target = LangevinAdapter::new(&m);
        let cfg = MhConfig {
            steps: 5_000,
            burn_in: 100,
            thin: 1,
            proposal_scale: Some(1e-9),
            seed: 7,
        };
        let out = mh_sample(&target, &cfg).unwrap();
        assert!(out.metadata.acceptance_rate > 0.999);
        assert!(out.metadata.warning.is_some(), "rate ~1 must warn");
    }

    #[test]
    fn deterministic_given_seed() {
        let m = generate_logreg_data(2, 50, 10.0, 5).unwrap();
        let cfg =
            MhConfig { steps: 20_000, burn_in: 2_000, thin: 4, proposal_scale: None, seed: 11 };
        let a = mh_sample(&m, &cfg).unwrap();
        let b = mh_sample(&m, &cfg).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.as_slice(), y.as_slice());
        }
    }

    #[test]
    fn two_seeds_agree_on_logistic_means() {
        let m = generate_logreg_data(3, 200, 10.0, 21).unwrap();
        let cfg = |seed| MhConfig {
            steps: 200_000,
            burn_in: 20_000,
            thin: 5,
            proposal_scale: None,
            seed,
        };
        let a = mh_sample(&m, &cfg(1)).unwrap();
        let b = mh_sample(&m, &cfg(2)).unwrap();
        for j in 0..3 {
            let xa: Vec<f64> = a.samples.iter().map(|s| s[j]).collect();
            let xb: Vec<f64> = b.samples.iter().map(|s| s[j]).collect();
            let (ma, mb) = (mean(&xa), mean(&xb));
            let sea = (population_variance(&xa) / ess_batch_means(&xa)).sqrt();
            let seb = (population_variance(&xb) / ess_batch_means(&xb)).sqrt();
            let combined = (sea * sea + seb * seb).sqrt();
            assert!(
                (ma - mb).abs() <= 4.0 * combined,
                "dim {j}: {ma} vs {mb} (se {combined})"
            );
        }
    }

    #[test]
    fn kolmogorov_smirnov_against_exact_posterior() {
        let m = gaussian_target();
        let target = LangevinAdapter::new(&m);
        let (mu, var_p) = m.exact_posterior();
        let cfg = MhConfig {
            steps: 600_000,
            burn_in: 20_000,
            thin: 10,
            proposal_scale: None,
            seed: 3,
        };
        let out = mh_sample(&target, &cfg).unwrap();
        let mut xs: Vec<f64> = out.samples.iter().map(|s| s.as_scalar()).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let sd = var_p.sqrt();
        let phi = |z: f64| 0.5 * (1.0 + erf_approx(z / std::f64::consts::SQRT_2));
        let n = xs.len() as f64;
        let mut d_stat = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            let cdf = phi((x - mu) / sd);
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            d_stat = d_stat.max((cdf - lo).abs()).max((cdf - hi).abs());
        }
        // 0.1% critical value c = 1.95 over sqrt of the effective count.
        let critical = 1.95 / out.metadata.ess.sqrt();
        assert!(d_stat <= critical, "KS {d_stat} > {critical} (ess {})", out.metadata.ess);
    }

    // Abramowitz-Stegun 7.1.26, |error| < 1.5e-7; ample for a KS smoke test.
    fn erf_approx(x: f64) -> f64 {
        let sign = x.signum();
        let x = x.abs();
        let t = 1.0 / (1.0 + 0.3275911 * x);
        let poly = t
            * (0.254829592
                + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
        sign * (1.0 - poly * (-x * x).exp())
    }

    #[test]
    fn ess_of_iid_series_is_near_n() {
        let mut rng = RngStream::new(9, 0);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.standard_normal()).collect();
        let ess = ess_batch_means(&xs);
        assert!(ess > 0.7 * 10_000.0 && ess < 1.4 * 10_000.0, "ess {ess}");
    }

    #[test]
    fn ess_detects_strong_autocorrelation() {
        // AR(1) with rho = 0.99: ESS should be around n (1-rho)/(1+rho).
        let mut rng = RngStream::new(10, 0);
        let rho: f64 = 0.99;
        let mut x = 0.0;
        let xs: Vec<f64> = (0..50_000)
            .map(|_| {
                x = rho * x + (1.0 - rho * rho).sqrt() * rng.standard_normal();
                x
            })
            .collect();
        let ess = ess_batch_means(&xs);
        let expected = 50_000.0 * (1.0 - rho) / (1.0 + rho);
        assert!(ess < 4.0 * expected && ess > expected / 4.0, "ess {ess} vs {expected}");
    }
}
