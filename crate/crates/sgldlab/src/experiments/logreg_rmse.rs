//! Same-cost comparison on Bayesian logistic regression: several (batch,
//! stepsize) points with the same per-unit-time gradient budget n/h, scored
//! by the scaled RMSE of posterior mean and standard-deviation estimates
//! against a long Metropolis-Hastings ground truth.

use super::common::{
    fmt_float, rmse_with_se, write_csv, write_meta, ExperimentError,
};
use crate::gradient::GradientScheme;
use crate::mh::{mh_sample, MhConfig, MhMetadata};
use crate::models::{find_mode, generate_logreg_data, ParamVector};
use crate::sampler::{
    merged_ledger, run_paths, steps_for_horizon, DriftConvention, InitDistribution, RunConfig,
};
use crate::scalar::{mean, population_variance};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogregRmseConfig {
    pub dim: usize,
    pub n_data: usize,
    pub prior_variance: f64,
    /// (batch, stepsize) points; same n/h means same gradient budget.
    pub pairs: Vec<(usize, f64)>,
    pub paths: usize,
    pub replicates: usize,
    /// T = horizon_const * ln(N) / N.
    pub horizon_const: f64,
    pub mh_steps: usize,
    pub mh_burn_in: usize,
    pub mh_thin: usize,
    pub bootstrap_resamples: usize,
    pub seed: u64,
}

impl Default for LogregRmseConfig {
    fn default() -> Self {
        Self {
            dim: 3,
            n_data: 1_000,
            prior_variance: 10.0,
            pairs: vec![(5, 5e-6), (10, 1e-5), (20, 2e-5), (40, 4e-5)],
            paths: 100,
            replicates: 50,
            horizon_const: 1.5,
            mh_steps: 2_000_000,
            mh_burn_in: 100_000,
            mh_thin: 10,
            bootstrap_resamples: 1_000,
            seed: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogregRmseRow {
    pub batch: usize,
    pub h: f64,
    pub cost: f64,
    pub steps: usize,
    /// "mean" (RMSE of posterior-mean vector, scaled by sqrt(N)) or
    /// "std" (RMSE of posterior-std vector, scaled by N).
    pub metric: &'static str,
    pub rmse_scaled: f64,
    pub rmse_se: f64,
    pub term_evals: u64,
}

#[derive(Debug)]
pub struct LogregRmseResult {
    pub rows: Vec<LogregRmseRow>,
    pub truth_mean: Vec<f64>,
    pub truth_std: Vec<f64>,
    pub mh_metadata: MhMetadata,
}

pub fn run_logreg_rmse(
    config: &LogregRmseConfig,
    out_dir: Option<&Path>,
) -> Result<LogregRmseResult, ExperimentError> {
    if config.pairs.is_empty() {
        return Err(ExperimentError::InvalidConfig("no (batch, h) pairs".into()));
    }
    let n_data = config.n_data;
    for &(batch, h) in &config.pairs {
        if batch < 1 || batch > n_data || !(h > 0.0) {
            return Err(ExperimentError::InvalidConfig(format!(
                "bad pair (n={batch}, h={h}) for N = {n_data}"
            )));
        }
    }
    let model = generate_logreg_data(config.dim, n_data, config.prior_variance, config.seed)?;

    // Ground truth from a long random-walk Metropolis chain.
    let mh = mh_sample(
        &model,
        &MhConfig {
            steps: config.mh_steps,
            burn_in: config.mh_burn_in,
            thin: config.mh_thin,
            proposal_scale: None,
            seed: config.seed,
        },
    )?;
    let d = config.dim;
    let coord_series = |j: usize| -> Vec<f64> { mh.samples.iter().map(|s| s[j]).collect() };
    let truth_mean: Vec<f64> = (0..d).map(|j| mean(&coord_series(j))).collect();
    let truth_std: Vec<f64> =
        (0..d).map(|j| population_variance(&coord_series(j)).sqrt()).collect();

    // All chains start at the posterior mode.
    let mode = find_mode(&model, 1e-8 * n_data as f64, 200)?;
    let horizon = config.horizon_const * (n_data as f64).ln() / n_data as f64;
    let sqrt_n = (n_data as f64).sqrt();

    let mut rows = Vec::new();
    for &(batch, h) in &config.pairs {
        let steps = steps_for_horizon(horizon, h);
        let scheme = if batch == n_data {
            GradientScheme::Full
        } else {
            GradientScheme::NaiveSubsample { batch }
        };
        let run = RunConfig {
            h,
            steps,
            paths: config.paths * config.replicates,
            seed: config.seed,
            convention: DriftConvention::Langevin,
            init: InitDistribution::Point { position: mode.as_slice().to_vec() },
            allow_unstable: false,
        };
        let outputs = run_paths(&model, &scheme, &run)?;
        let term_evals = merged_ledger(&outputs).term_evals;
        let finals: Vec<&ParamVector> = outputs.iter().map(|o| &o.final_state).collect();

        // Replicate r owns the contiguous path block [r*P, (r+1)*P).
        let mut sq_err_mean = Vec::with_capacity(config.replicates);
        let mut sq_err_std = Vec::with_capacity(config.replicates);
        for chunk in finals.chunks_exact(config.paths) {
            let mut em = 0.0;
            let mut es = 0.0;
            for j in 0..d {
                let vals: Vec<f64> = chunk.iter().map(|s| s[j]).collect();
                let mu_hat = mean(&vals);
                let std_hat = population_variance(&vals).sqrt();
                em += (mu_hat - truth_mean[j]) * (mu_hat - truth_mean[j]);
                es += (std_hat - truth_std[j]) * (std_hat - truth_std[j]);
            }
            sq_err_mean.push(em * sqrt_n * sqrt_n);
            sq_err_std.push(es * (n_data * n_data) as f64);
        }
        debug_assert_eq!(sq_err_mean.len(), config.replicates);

        for (metric, sq_errors) in [("mean", &sq_err_mean), ("std", &sq_err_std)] {
            let (rmse_scaled, rmse_se) =
                rmse_with_se(sq_errors, config.bootstrap_resamples, config.seed);
            rows.push(LogregRmseRow {
                batch,
                h,
                cost: batch as f64 / h,
                steps,
                metric,
                rmse_scaled,
                rmse_se,
                term_evals,
            });
        }
    }

    if let Some(dir) = out_dir {
        let csv_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    format!("{:010}", r.batch),
                    fmt_float(r.h),
                    r.metric.to_string(),
                    format!("{:010}", n_data),
                    config.paths.to_string(),
                    fmt_float(horizon),
                    r.steps.to_string(),
                    if r.batch == n_data { "full".into() } else { format!("naive-{}", r.batch) },
                    fmt_float(r.cost),
                    fmt_float(r.rmse_scaled),
                    fmt_float(r.rmse_se),
                    r.term_evals.to_string(),
                ]
            })
            .collect();
        write_csv(
            &dir.join("logreg_rmse.csv"),
            "n,h,metric,N,P,T,steps,scheme,cost,rmse_scaled,rmse_se,term_evals",
            csv_rows,
        )?;
        write_meta(
            dir,
            "logreg-rmse",
            config,
            serde_json::json!({
                "truth_mean": truth_mean,
                "truth_std": truth_std,
                "mh_ess": mh.metadata.ess,
                "mh_acceptance_rate": mh.metadata.acceptance_rate,
                "mh_tuned_scale": mh.metadata.tuned_scale,
                "horizon": horizon,
                "mode": mode.as_slice(),
            }),
        )?;
    }

    Ok(LogregRmseResult {
        rows,
        truth_mean,
        truth_std,
        mh_metadata: mh.metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> LogregRmseConfig {
        LogregRmseConfig {
            dim: 2,
            n_data: 200,
            pairs: vec![(4, 2e-5), (16, 8e-5)],
            paths: 40,
            replicates: 30,
            mh_steps: 250_000,
            mh_burn_in: 25_000,
            mh_thin: 10,
            bootstrap_resamples: 400,
            ..Default::default()
        }
    }

    #[test]
    fn same_cost_points_agree_on_scaled_mean_rmse() {
        let result = run_logreg_rmse(&small_config(), None).unwrap();
        assert!(result.mh_metadata.ess >= 1_000.0, "ess {}", result.mh_metadata.ess);
        let means: Vec<&LogregRmseRow> =
            result.rows.iter().filter(|r| r.metric == "mean").collect();
        assert_eq!(means.len(), 2);
        assert!((means[0].cost - means[1].cost).abs() < 1e-9);
        let gap = (means[0].rmse_scaled - means[1].rmse_scaled).abs();
        let slack = 3.0 * (means[0].rmse_se + means[1].rmse_se);
        assert!(gap <= slack, "gap {gap} vs slack {slack}");
    }

    #[test]
    fn cost_ledger_matches_prediction() {
        let cfg = LogregRmseConfig {
            dim: 2,
            n_data: 100,
            pairs: vec![(5, 1e-4)],
            paths: 3,
            replicates: 4,
            mh_steps: 30_000,
            mh_burn_in: 2_000,
            mh_thin: 10,
            bootstrap_resamples: 100,
            ..Default::default()
        };
        let result = run_logreg_rmse(&cfg, None).unwrap();
        let row = &result.rows[0];
        assert_eq!(row.term_evals, (row.steps as u64) * 5 * 12);
    }

    #[test]
    fn csv_is_deterministic() {
        let cfg = LogregRmseConfig {
            dim: 2,
            n_data: 100,
            pairs: vec![(5, 1e-4), (10, 2e-4)],
            paths: 5,
            replicates: 4,
            mh_steps: 30_000,
            mh_burn_in: 2_000,
            mh_thin: 10,
            bootstrap_resamples: 100,
            ..Default::default()
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run_logreg_rmse(&cfg, Some(d1.path())).unwrap();
        run_logreg_rmse(&cfg, Some(d2.path())).unwrap();
        let a = std::fs::read(d1.path().join("logreg_rmse.csv")).unwrap();
        let b = std::fs::read(d2.path().join("logreg_rmse.csv")).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn rejects_bad_pair() {
        let mut cfg = small_config();
        cfg.pairs = vec![(0, 1e-5)];
        assert!(run_logreg_rmse(&cfg, None).is_err());
    }
}
