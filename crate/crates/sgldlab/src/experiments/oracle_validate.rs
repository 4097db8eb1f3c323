//! Regression battery binding simulation to the analytic oracle on the
//! Gaussian model: enumeration vs closed-form subsampling variance, moment
//! agreement for every gradient scheme, same-noise contraction, stationary
//! autocorrelation, and recursion-vs-closed-form consistency. Emits one
//! pass/fail row per check; a `corrupt_h` negative control perturbs the
//! oracle inputs so the battery must fail.

use super::common::{fmt_float, write_csv, write_meta, ExperimentError};
use crate::gradient::{precompute_cv, CostLedger, GradientScheme};
use crate::models::{generate_gaussian_data, GaussianConjugateModel};
use crate::oracle::{oracle_var_b, oracle_variance, OracleInputs};
use crate::rng::{enumerate_subsample_moments, RngStream, STREAM_VALIDATE};
use crate::sampler::{run_path, run_paths, DriftConvention, InitDistribution, RunConfig};
use crate::scalar::{mean, population_variance};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleValidateConfig {
    pub n_data: usize,
    pub sigma_theta_sq: f64,
    pub sigma_y_sq: f64,
    pub data_mean: f64,
    pub h: f64,
    pub steps: usize,
    pub paths: usize,
    /// Naive-subsample batch sizes checked alongside full and CV.
    pub batches: Vec<usize>,
    pub theta0: f64,
    /// Autocorrelation chain length.
    pub ar_steps: usize,
    /// Negative control: perturb the oracle's stepsize so that every
    /// simulation-vs-oracle comparison must fail.
    pub corrupt_h: bool,
    pub seed: u64,
}

impl Default for OracleValidateConfig {
    fn default() -> Self {
        Self {
            n_data: 100,
            sigma_theta_sq: 1.0,
            sigma_y_sq: 1.0,
            data_mean: 1.0,
            h: 1e-3,
            steps: 50,
            paths: 100_000,
            batches: vec![1, 10, 100],
            theta0: 0.0,
            ar_steps: 200_000,
            corrupt_h: false,
            seed: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidateRow {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug)]
pub struct OracleValidateResult {
    pub rows: Vec<ValidateRow>,
    pub all_pass: bool,
}

fn push(rows: &mut Vec<ValidateRow>, name: impl Into<String>, statistic: f64, threshold: f64) {
    let name = name.into();
    rows.push(ValidateRow {
        pass: statistic.is_finite() && statistic <= threshold,
        name,
        statistic,
        threshold,
    });
}

pub fn run_oracle_validate(
    config: &OracleValidateConfig,
    out_dir: Option<&Path>,
) -> Result<OracleValidateResult, ExperimentError> {
    let mut rows = Vec::new();
    // The negative control perturbs only what the oracle believes.
    let oracle_h = if config.corrupt_h { 1.2 * config.h } else { config.h };

    // 1. Enumerated subsampling variance vs the closed form, exhaustively
    //    for small N over random datasets.
    {
        let mut rng = RngStream::new(config.seed, STREAM_VALIDATE);
        let mut worst = 0.0f64;
        for n_data in 2..=12usize {
            for _ in 0..5 {
                let data: Vec<f64> = (0..n_data).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
                // Per-datum contribution to B = (N/n) sum y_i / (2 sigma_y^2).
                let terms: Vec<Vec<f64>> =
                    data.iter().map(|&y| vec![y / (2.0 * config.sigma_y_sq)]).collect();
                for batch in 1..=n_data {
                    let (_, enumerated) = enumerate_subsample_moments(&terms, batch)
                        .expect("N <= 12 is enumerable");
                    let closed = oracle_var_b(&data, config.sigma_y_sq, batch)?;
                    worst = worst.max((enumerated - closed).abs());
                }
            }
        }
        push(&mut rows, "var_b_enumeration_exactness", worst, 1e-12);
    }

    // 2. Moment agreement per scheme: z-scores of simulated mean and
    //    variance of theta_M against the oracle recursion.
    {
        let data = generate_gaussian_data(
            config.n_data,
            config.data_mean,
            config.sigma_y_sq,
            config.seed,
        );
        let model =
            GaussianConjugateModel::new(config.sigma_theta_sq, config.sigma_y_sq, data)?;
        let a = model.drift_a();
        let (mu_p, _) = model.exact_posterior();

        let mut schemes: Vec<(String, GradientScheme, f64)> =
            vec![("full".into(), GradientScheme::Full, 0.0)];
        for &batch in &config.batches {
            let var_b = if batch == config.n_data {
                0.0
            } else {
                oracle_var_b(model.data(), config.sigma_y_sq, batch)?
            };
            let scheme = if batch == config.n_data {
                GradientScheme::Full
            } else {
                GradientScheme::NaiveSubsample { batch }
            };
            schemes.push((format!("naive-{batch}"), scheme, var_b));
        }
        let mut ledger = CostLedger::default();
        // Gaussian CV has exactly zero subsampling variance.
        schemes.push((
            "cv-1".into(),
            precompute_cv(&model, 1, 1e-10 * config.n_data as f64, &mut ledger)?,
            0.0,
        ));

        for (label, scheme, var_b) in schemes {
            let run = RunConfig {
                h: config.h,
                steps: config.steps,
                paths: config.paths,
                seed: config.seed,
                convention: DriftConvention::Ou,
                init: InitDistribution::Point { position: vec![config.theta0] },
                allow_unstable: false,
            };
            let outputs = run_paths(&model, &scheme, &run)?;
            let finals: Vec<f64> =
                outputs.iter().map(|o| o.final_state.as_scalar()).collect();
            let p = finals.len() as f64;
            let m_hat = mean(&finals);
            let v_hat = population_variance(&finals);

            let beta_m = (1.0 - a * oracle_h).powi(config.steps as i32);
            let mean_pred = mu_p + beta_m * (config.theta0 - mu_p);
            let var_pred = oracle_variance(&OracleInputs {
                drift_a: a,
                mean_b: model.drift_b(),
                var_b,
                h: oracle_h,
                theta0_mean: config.theta0,
                theta0_var: 0.0,
                steps: config.steps,
                paths: config.paths,
            });
            let z_mean = (m_hat - mean_pred).abs() / (v_hat / p).sqrt();
            let z_var = (v_hat - var_pred).abs() / (var_pred * (2.0 / (p - 1.0)).sqrt());
            push(&mut rows, format!("moment_mean_z_{label}"), z_mean, 4.0);
            push(&mut rows, format!("moment_var_z_{label}"), z_var, 4.0);
        }

        // 3. Same-noise contraction: two initial points driven by identical
        //    noise and subsets contract at exactly (1 - A h)^M.
        {
            let mk_run = |x0: f64| RunConfig {
                h: config.h,
                steps: config.steps,
                paths: 1,
                seed: config.seed,
                convention: DriftConvention::Ou,
                init: InitDistribution::Point { position: vec![x0] },
                allow_unstable: false,
            };
            let a_path = run_path(&model, &GradientScheme::Full, &mk_run(3.0), 0)?;
            let b_path = run_path(&model, &GradientScheme::Full, &mk_run(-1.0), 0)?;
            let gap = (a_path.final_state.as_scalar() - b_path.final_state.as_scalar()).abs();
            let expected = (1.0 - a * oracle_h).powi(config.steps as i32) * 4.0;
            push(&mut rows, "same_noise_contraction", (gap - expected).abs(), 1e-10);
        }

        // 4. Stationary lag-1 autocorrelation of the full-gradient chain
        //    equals 1 - A h.
        {
            let sigma_p_sq = model.exact_posterior().1;
            let mut rng = RngStream::new(config.seed, STREAM_VALIDATE + 1);
            let mut x = mu_p + sigma_p_sq.sqrt() * rng.standard_normal();
            let mut xs = Vec::with_capacity(config.ar_steps);
            let b = model.drift_b();
            for _ in 0..config.ar_steps {
                x = x + config.h * (-a * x + b) + config.h.sqrt() * rng.standard_normal();
                xs.push(x);
            }
            let m = mean(&xs);
            let var = population_variance(&xs);
            let cov: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>()
                / (xs.len() - 1) as f64;
            let rho = cov / var;
            let rho_pred = 1.0 - a * oracle_h;
            // Effective-sample-size-adjusted tolerance for the AR(1)
            // autocorrelation estimator.
            let tol = 4.0 * ((1.0 - rho_pred * rho_pred).abs().max(1e-12)
                / config.ar_steps as f64)
                .sqrt()
                .max(1e-6);
            push(&mut rows, "stationary_lag1_autocorrelation", (rho - rho_pred).abs(), tol);
        }

        // 5. Variance recursion vs its closed form over random inputs.
        {
            let mut rng = RngStream::new(config.seed, STREAM_VALIDATE + 2);
            let mut worst = 0.0f64;
            for _ in 0..500 {
                let a_r = rng.uniform_in(0.5, 50.0);
                let h_r = rng.uniform_in(0.01, 0.9) / a_r;
                let var_b = rng.uniform_in(0.0, 100.0);
                let v0 = rng.uniform_in(0.0, 2.0);
                let steps = 1 + rng.below(80);
                let mut v = v0;
                for _ in 0..steps {
                    let beta = 1.0 - a_r * h_r;
                    v = beta * beta * v + h_r + h_r * h_r * var_b;
                }
                let closed = oracle_variance(&OracleInputs {
                    drift_a: a_r,
                    mean_b: 0.0,
                    var_b,
                    h: h_r,
                    theta0_mean: 0.0,
                    theta0_var: v0,
                    steps,
                    paths: 1,
                });
                worst = worst.max((v - closed).abs() / v.max(1e-300));
            }
            push(&mut rows, "variance_recursion_closed_form", worst, 1e-12);
        }
    }

    let all_pass = rows.iter().all(|r| r.pass);

    if let Some(dir) = out_dir {
        let csv_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.name.clone(),
                    fmt_float(r.statistic),
                    fmt_float(r.threshold),
                    if r.pass { "pass".into() } else { "fail".into() },
                ]
            })
            .collect();
        write_csv(&dir.join("oracle_validate.csv"), "name,statistic,threshold,pass", csv_rows)?;
        write_meta(
            dir,
            "oracle-validate",
            config,
            serde_json::json!({ "all_pass": all_pass }),
        )?;
    }

    Ok(OracleValidateResult { rows, all_pass })
}
