//! Cost-regime study on the Gaussian model: asymptotic cost-class
//! prediction per scheme, plus an oracle-certified minimal-cost search at
//! eps = N^{-1/2} whose realized ledger cost is fitted against N.

use super::common::{fmt_float, ols_slope, write_csv, write_meta, ExperimentError};
use crate::gradient::{precompute_cv, CostLedger, GradientScheme};
use crate::models::{generate_gaussian_data, GaussianConjugateModel};
use crate::oracle::{oracle_var_b, oracle_variance, OracleInputs};
use crate::sampler::{merged_ledger, run_paths, DriftConvention, InitDistribution, RunConfig};
use crate::scalar::mean;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeKind {
    Full,
    Naive,
    Cv,
}

impl SchemeKind {
    pub fn label(self) -> &'static str {
        match self {
            SchemeKind::Full => "full",
            SchemeKind::Naive => "naive",
            SchemeKind::Cv => "cv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRegimePrediction {
    /// 1: eps^{-1} <= sqrt(N); 2: sqrt(N) < eps^{-1} <= N; 3: eps^{-1} > N.
    pub regime: u8,
    /// Value of the regime's cost expression with unit constant.
    pub cost: f64,
}

/// Asymptotic cost class of reaching accuracy eps with N data points,
/// with unit constants:
///   full:  { N log(1/eps); eps^{-2} log; eps^{-3} log }
///   naive: { N log(1/eps); eps^{-2} log; eps^{-3} N^{-2} log }
///   cv:    { log(1/eps); eps^{-2} N^{-1} log; eps^{-3} N^{-2} log }
pub fn predict_cost(epsilon: f64, n_data: usize, scheme: SchemeKind) -> CostRegimePrediction {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let n = n_data as f64;
    let inv_eps = 1.0 / epsilon;
    let log_term = inv_eps.ln().max(1.0);
    let regime = if inv_eps <= n.sqrt() {
        1
    } else if inv_eps <= n {
        2
    } else {
        3
    };
    let cost = match (scheme, regime) {
        (SchemeKind::Full, 1) | (SchemeKind::Naive, 1) => n * log_term,
        (SchemeKind::Full, 2) | (SchemeKind::Naive, 2) => inv_eps.powi(2) * log_term,
        (SchemeKind::Full, 3) => inv_eps.powi(3) * log_term,
        (SchemeKind::Naive, 3) | (SchemeKind::Cv, 3) => inv_eps.powi(3) / (n * n) * log_term,
        (SchemeKind::Cv, 1) => log_term,
        (SchemeKind::Cv, 2) => inv_eps.powi(2) / n * log_term,
        _ => unreachable!(),
    };
    CostRegimePrediction { regime, cost }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostRegimesConfig {
    /// Data sizes N as log10 values (so half-decade grids stay exact).
    pub n_log10: Vec<f64>,
    pub sigma_theta_sq: f64,
    pub sigma_y_sq: f64,
    pub data_mean: f64,
    pub schemes: Vec<SchemeKind>,
    /// Stepsize fractions r = A*h searched over.
    pub r_grid: Vec<f64>,
    pub theta0: f64,
    pub seed: u64,
}

impl Default for CostRegimesConfig {
    fn default() -> Self {
        Self {
            n_log10: vec![3.0, 3.5, 4.0, 4.5, 5.0, 6.0],
            sigma_theta_sq: 1.0,
            sigma_y_sq: 1.0,
            data_mean: 1.0,
            schemes: vec![SchemeKind::Full, SchemeKind::Naive, SchemeKind::Cv],
            r_grid: vec![0.9, 0.7, 0.5, 0.3],
            theta0: 0.0,
            seed: 5,
        }
    }
}

/// Minimal-cost parameter plan certified by the oracle moment recursion:
/// squared bias + squared standard-deviation gap + V_M/P <= eps^2.
#[derive(Debug, Clone, Copy)]
pub struct CertifiedPlan {
    pub r: f64,
    pub h: f64,
    pub batch: usize,
    pub steps: usize,
    pub paths: usize,
    pub mse_bound: f64,
    /// Predicted per-run cost in term evaluations, excluding precompute.
    pub cost: u64,
}

#[derive(Debug, Clone)]
pub struct CostRegimeRow {
    pub scheme: SchemeKind,
    pub n_data: usize,
    pub epsilon: f64,
    pub plan: CertifiedPlan,
    pub prediction: CostRegimePrediction,
    pub term_evals: u64,
    pub precompute_term_evals: u64,
    pub realized_sq_error: f64,
}

#[derive(Debug)]
pub struct CostRegimesResult {
    pub rows: Vec<CostRegimeRow>,
    /// (scheme, OLS slope of ln(term_evals) against ln(N)).
    pub slopes: Vec<(SchemeKind, f64)>,
}

fn batch_grid(scheme: SchemeKind, n_data: usize) -> Vec<usize> {
    match scheme {
        SchemeKind::Full => vec![n_data],
        SchemeKind::Cv => vec![1],
        SchemeKind::Naive => {
            let mut g = Vec::new();
            let mut n = 1usize;
            while n < n_data {
                g.push(n);
                n *= 2;
            }
            g.push(n_data);
            g
        }
    }
}

/// Search (r, n, M, P) for the cheapest oracle-certified plan.
fn certify(
    scheme: SchemeKind,
    model: &GaussianConjugateModel,
    r_grid: &[f64],
    theta0: f64,
    eps_sq: f64,
) -> Result<CertifiedPlan, ExperimentError> {
    let a = model.drift_a();
    let (mu_p, sigma_p_sq) = model.exact_posterior();
    let sigma_p = sigma_p_sq.sqrt();
    // CV chains start at the mode (= posterior mean here), others at theta0.
    let start = if scheme == SchemeKind::Cv { mu_p } else { theta0 };
    let theta_gap = start - mu_p;
    let n_data = model.data().len();

    let mut best: Option<CertifiedPlan> = None;
    for &r in r_grid {
        assert!(r > 0.0 && r < 1.0, "r grid must lie in (0,1)");
        let h = r / a;
        for &batch in &batch_grid(scheme, n_data) {
            let var_b = match scheme {
                SchemeKind::Naive if batch < n_data => {
                    oracle_var_b(model.data(), model.sigma_y_sq(), batch)?
                }
                // Full gradients and Gaussian CV have no subsampling noise.
                _ => 0.0,
            };
            let m_max = (40.0 / r).ceil() as usize;
            for steps in 1..=m_max {
                let v_m = oracle_variance(&OracleInputs {
                    drift_a: a,
                    mean_b: model.drift_b(),
                    var_b,
                    h,
                    theta0_mean: start,
                    theta0_var: 0.0,
                    steps,
                    paths: 1,
                });
                let beta_m = (1.0 - r).powi(steps as i32);
                let w2_sq = (beta_m * theta_gap).powi(2) + (v_m.sqrt() - sigma_p).powi(2);
                if w2_sq >= eps_sq {
                    continue;
                }
                let paths = (v_m / (eps_sq - w2_sq)).ceil().max(1.0) as usize;
                let evals_per_step = if scheme == SchemeKind::Full { n_data } else { batch };
                let cost = (steps as u64) * (evals_per_step as u64) * (paths as u64);
                let mse_bound = w2_sq + v_m / paths as f64;
                debug_assert!(mse_bound <= eps_sq * (1.0 + 1e-9));
                if best.map_or(true, |b| cost < b.cost) {
                    best = Some(CertifiedPlan {
                        r,
                        h,
                        batch,
                        steps,
                        paths,
                        mse_bound,
                        cost,
                    });
                }
            }
        }
    }
    best.ok_or_else(|| {
        ExperimentError::InvalidConfig(format!(
            "no certified plan for {} at N = {n_data}",
            scheme.label()
        ))
    })
}

pub fn run_cost_regimes(
    config: &CostRegimesConfig,
    out_dir: Option<&Path>,
) -> Result<CostRegimesResult, ExperimentError> {
    let mut rows = Vec::new();
    for &scheme in &config.schemes {
        for &lg in &config.n_log10 {
            let n_data = 10f64.powf(lg).round() as usize;
            let eps = 1.0 / (n_data as f64).sqrt();
            let eps_sq = eps * eps;
            let data =
                generate_gaussian_data(n_data, config.data_mean, config.sigma_y_sq, config.seed);
            let model =
                GaussianConjugateModel::new(config.sigma_theta_sq, config.sigma_y_sq, data)?;
            let (mu_p, _) = model.exact_posterior();
            let plan = certify(scheme, &model, &config.r_grid, config.theta0, eps_sq)?;

            let mut precompute = CostLedger::default();
            let grad_scheme = match scheme {
                SchemeKind::Full => GradientScheme::Full,
                SchemeKind::Naive if plan.batch == n_data => GradientScheme::Full,
                SchemeKind::Naive => GradientScheme::NaiveSubsample { batch: plan.batch },
                SchemeKind::Cv => {
                    precompute_cv(&model, plan.batch, 1e-10 * n_data as f64, &mut precompute)?
                }
            };
            let start = if scheme == SchemeKind::Cv { mu_p } else { config.theta0 };
            let run = RunConfig {
                h: plan.h,
                steps: plan.steps,
                paths: plan.paths,
                seed: config.seed,
                convention: DriftConvention::Ou,
                init: InitDistribution::Point { position: vec![start] },
                allow_unstable: false,
            };
            let outputs = run_paths(&model, &grad_scheme, &run)?;
            let ledger = merged_ledger(&outputs);
            let finals: Vec<f64> = outputs.iter().map(|o| o.final_state.as_scalar()).collect();
            let realized_sq_error = (mean(&finals) - mu_p).powi(2);

            rows.push(CostRegimeRow {
                scheme,
                n_data,
                epsilon: eps,
                plan,
                prediction: predict_cost(eps, n_data, scheme),
                term_evals: ledger.term_evals,
                precompute_term_evals: precompute.precompute_term_evals,
                realized_sq_error,
            });
        }
    }

    let mut slopes = Vec::new();
    for &scheme in &config.schemes {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| ((r.n_data as f64).ln(), (r.term_evals as f64).ln()))
            .collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        if xs.len() >= 2 {
            slopes.push((scheme, ols_slope(&xs, &ys)));
        }
    }

    if let Some(dir) = out_dir {
        let csv_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|row| {
                vec![
                    row.scheme.label().to_string(),
                    format!("{:010}", row.n_data),
                    fmt_float(row.epsilon),
                    fmt_float(row.plan.r),
                    fmt_float(row.plan.h),
                    format!("{:010}", row.plan.batch),
                    row.plan.steps.to_string(),
                    row.plan.paths.to_string(),
                    row.prediction.regime.to_string(),
                    fmt_float(row.prediction.cost),
                    fmt_float(row.plan.mse_bound),
                    row.term_evals.to_string(),
                    row.precompute_term_evals.to_string(),
                    fmt_float(row.realized_sq_error),
                ]
            })
            .collect();
        write_csv(
            &dir.join("cost_regimes.csv"),
            "scheme,N,eps,r,h,n,M,P,regime,predicted_cost,certified_mse_bound,term_evals,precompute_term_evals,realized_sq_error",
            csv_rows,
        )?;
        write_meta(
            dir,
            "cost-regimes",
            config,
            serde_json::json!({
                "slopes": slopes
                    .iter()
                    .map(|(s, v)| (s.label(), v))
                    .collect::<Vec<_>>(),
            }),
        )?;
    }

    Ok(CostRegimesResult { rows, slopes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes_classified_by_inverse_eps() {
        let n = 10_000;
        assert_eq!(predict_cost(0.02, n, SchemeKind::Full).regime, 1);
        assert_eq!(predict_cost(1e-3, n, SchemeKind::Full).regime, 2);
        assert_eq!(predict_cost(1e-5, n, SchemeKind::Full).regime, 3);
    }

    #[test]
    fn expressions_continuous_at_sqrt_n_boundary() {
        for scheme in [SchemeKind::Full, SchemeKind::Naive, SchemeKind::Cv] {
            for n in [1_000usize, 1_000_000] {
                let eps = 1.0 / (n as f64).sqrt();
                let below = predict_cost(eps * 1.0001, n, scheme);
                let above = predict_cost(eps * 0.9999, n, scheme);
                assert_eq!(below.regime, 1);
                assert_eq!(above.regime, 2);
                let ratio = above.cost / below.cost;
                assert!((ratio - 1.0).abs() < 1e-3, "{}: ratio {ratio}", scheme.label());
            }
        }
    }

    #[test]
    fn full_cost_at_posterior_accuracy_is_n_log_n() {
        let n = 1_000_000;
        let eps = 1e-3;
        let p = predict_cost(eps, n, SchemeKind::Full);
        assert_eq!(p.regime, 1);
        assert!((p.cost - n as f64 * (1e3f64).ln()).abs() < 1e-6 * p.cost);
        let cv = predict_cost(eps, n, SchemeKind::Cv);
        assert!((cv.cost - (1e3f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn certified_slopes_on_reduced_grid() {
        let cfg = CostRegimesConfig {
            n_log10: vec![3.0, 4.0, 5.0],
            ..Default::default()
        };
        let result = run_cost_regimes(&cfg, None).unwrap();
        let slope_of = |k: SchemeKind| {
            result.slopes.iter().find(|(s, _)| *s == k).unwrap().1
        };
        assert!(
            (0.85..=1.2).contains(&slope_of(SchemeKind::Full)),
            "full slope {}",
            slope_of(SchemeKind::Full)
        );
        assert!(
            (0.85..=1.2).contains(&slope_of(SchemeKind::Naive)),
            "naive slope {}",
            slope_of(SchemeKind::Naive)
        );
        assert!(
            slope_of(SchemeKind::Cv) <= 0.25,
            "cv slope {}",
            slope_of(SchemeKind::Cv)
        );
        assert!(
            (slope_of(SchemeKind::Naive) - slope_of(SchemeKind::Full)).abs() <= 0.15,
            "naive vs full gap"
        );
    }

    #[test]
    fn ledger_matches_certified_cost() {
        let cfg = CostRegimesConfig {
            n_log10: vec![3.0],
            ..Default::default()
        };
        let result = run_cost_regimes(&cfg, None).unwrap();
        for row in &result.rows {
            assert_eq!(row.term_evals, row.plan.cost, "{}", row.scheme.label());
            assert!(row.plan.mse_bound <= row.epsilon * row.epsilon * (1.0 + 1e-9));
            if row.scheme == SchemeKind::Cv {
                assert_eq!(row.precompute_term_evals, row.n_data as u64);
            } else {
                assert_eq!(row.precompute_term_evals, 0);
            }
        }
    }
}
