//! Constant-cost families on the Gaussian model: batch size and stepsize
//! traded against each other at fixed n/h, showing the RMSE of the P-path
//! mean estimator depends on the cost, not on the split.

use super::common::{fmt_float, rmse_with_se, write_csv, write_meta, ExperimentError};
use crate::gradient::GradientScheme;
use crate::models::{generate_gaussian_data, GaussianConjugateModel};
use crate::sampler::{
    merged_ledger, run_paths, steps_for_horizon, DriftConvention, InitDistribution, RunConfig,
};
use crate::scalar::mean;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RmseConstantCostConfig {
    pub n_grid: Vec<usize>,
    pub sigma_theta_sq: f64,
    pub sigma_y_sq: f64,
    pub data_mean: f64,
    /// Batches of the constant-cost family; stepsizes follow as
    /// h(n) = top_r * n / (A * max_batch), so n/h is fixed within a family.
    pub batches: Vec<usize>,
    /// Stability fraction of the largest family member: h(max_batch) = top_r/A.
    pub top_r: f64,
    pub paths: usize,
    pub replicates: usize,
    /// T = horizon_const * ln(1/eps) / N.
    pub horizon_const: f64,
    pub theta0: f64,
    pub bootstrap_resamples: usize,
    /// Add a probe row with the smallest batch doubled at unchanged h.
    pub cost_probe: bool,
    pub seed: u64,
}

impl Default for RmseConstantCostConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![1_000, 10_000],
            sigma_theta_sq: 1.0,
            sigma_y_sq: 1.0,
            data_mean: 1.0,
            batches: vec![1, 10, 100, 1_000],
            top_r: 0.5,
            paths: 10,
            replicates: 200,
            horizon_const: 3.0,
            theta0: 0.0,
            bootstrap_resamples: 1_000,
            cost_probe: true,
            seed: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RmseRow {
    pub n_data: usize,
    pub batch: usize,
    pub h: f64,
    pub family: &'static str,
    pub rmse: f64,
    pub rmse_over_eps: f64,
    pub rmse_se: f64,
    pub horizon: f64,
    pub steps: usize,
    pub term_evals: u64,
}

#[derive(Debug)]
pub struct RmseConstantCostResult {
    pub rows: Vec<RmseRow>,
}

pub fn run_rmse_constant_cost(
    config: &RmseConstantCostConfig,
    out_dir: Option<&Path>,
) -> Result<RmseConstantCostResult, ExperimentError> {
    let max_batch = *config
        .batches
        .iter()
        .max()
        .ok_or_else(|| ExperimentError::InvalidConfig("empty batch list".into()))?;
    if !(config.top_r > 0.0 && config.top_r < 1.0) {
        return Err(ExperimentError::InvalidConfig(format!(
            "top_r must be in (0,1), got {}",
            config.top_r
        )));
    }

    let mut rows = Vec::new();
    for &n_data in &config.n_grid {
        if max_batch > n_data {
            return Err(ExperimentError::InvalidConfig(format!(
                "max batch {max_batch} exceeds N = {n_data}"
            )));
        }
        let data =
            generate_gaussian_data(n_data, config.data_mean, config.sigma_y_sq, config.seed);
        let model = GaussianConjugateModel::new(config.sigma_theta_sq, config.sigma_y_sq, data)?;
        let a = model.drift_a();
        let (mu_p, _) = model.exact_posterior();
        let eps = 1.0 / (n_data as f64).sqrt();
        let horizon = config.horizon_const * (1.0 / eps).ln() / n_data as f64;

        let mut jobs: Vec<(usize, f64, &'static str)> = config
            .batches
            .iter()
            .map(|&n| (n, config.top_r * n as f64 / (a * max_batch as f64), "constant_cost"))
            .collect();
        if config.cost_probe {
            let &min_batch = config.batches.iter().min().expect("non-empty");
            let h_min = config.top_r * min_batch as f64 / (a * max_batch as f64);
            jobs.push((2 * min_batch, h_min, "cost_probe"));
        }

        for (batch, h, family) in jobs {
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
                convention: DriftConvention::Ou,
                init: InitDistribution::Point { position: vec![config.theta0] },
                allow_unstable: false,
            };
            let outputs = run_paths(&model, &scheme, &run)?;
            let ledger = merged_ledger(&outputs);
            let finals: Vec<f64> = outputs.iter().map(|o| o.final_state.as_scalar()).collect();
            // Replicate r owns the contiguous path block [r*P, (r+1)*P).
            let sq_errors: Vec<f64> = finals
                .chunks_exact(config.paths)
                .map(|chunk| {
                    let est = mean(chunk);
                    (est - mu_p) * (est - mu_p)
                })
                .collect();
            debug_assert_eq!(sq_errors.len(), config.replicates);
            let (rmse, rmse_se) =
                rmse_with_se(&sq_errors, config.bootstrap_resamples, config.seed);
            rows.push(RmseRow {
                n_data,
                batch,
                h,
                family,
                rmse,
                rmse_over_eps: rmse / eps,
                rmse_se,
                horizon,
                steps,
                term_evals: ledger.term_evals,
            });
        }
    }

    if let Some(dir) = out_dir {
        let csv_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    format!("{:010}", r.n_data),
                    format!("{:010}", r.batch),
                    fmt_float(r.h),
                    config.paths.to_string(),
                    fmt_float(r.horizon),
                    if r.batch == r.n_data { "full".into() } else { format!("naive-{}", r.batch) },
                    "coord0".to_string(),
                    r.family.to_string(),
                    fmt_float(r.rmse),
                    fmt_float(r.rmse_over_eps),
                    fmt_float(r.rmse_se),
                    r.term_evals.to_string(),
                ]
            })
            .collect();
        write_csv(
            &dir.join("rmse_constant_cost.csv"),
            "N,n,h,P,T,scheme,functional,family,rmse,rmse_over_eps,rmse_se,term_evals",
            csv_rows,
        )?;
        write_meta(
            dir,
            "rmse-constant-cost",
            config,
            serde_json::json!({
                "replicates": config.replicates,
                "eps_rule": "N^{-1/2}",
            }),
        )?;
    }

    Ok(RmseConstantCostResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> RmseConstantCostConfig {
        RmseConstantCostConfig {
            n_grid: vec![400],
            batches: vec![1, 5, 25, 100],
            replicates: 100,
            bootstrap_resamples: 400,
            ..Default::default()
        }
    }

    #[test]
    fn family_rmse_flat_and_below_eps() {
        let result = run_rmse_constant_cost(&small_config(), None).unwrap();
        let family: Vec<&RmseRow> =
            result.rows.iter().filter(|r| r.family == "constant_cost").collect();
        assert_eq!(family.len(), 4);
        let lo = family.iter().map(|r| r.rmse).fold(f64::INFINITY, f64::min);
        let hi = family.iter().map(|r| r.rmse).fold(0.0f64, f64::max);
        assert!(hi / lo <= 1.5, "family spread {}", hi / lo);
        for r in &family {
            assert!(r.rmse_over_eps <= 1.0, "rmse {} above eps (n={})", r.rmse_over_eps, r.batch);
        }
    }

    #[test]
    fn doubling_batch_at_fixed_h_does_not_hurt() {
        let result = run_rmse_constant_cost(&small_config(), None).unwrap();
        let probe = result.rows.iter().find(|r| r.family == "cost_probe").unwrap();
        let base = result
            .rows
            .iter()
            .find(|r| r.family == "constant_cost" && (r.h - probe.h).abs() < 1e-15)
            .unwrap();
        let slack = 2.0 * (probe.rmse_se + base.rmse_se);
        assert!(
            probe.rmse <= base.rmse + slack,
            "probe rmse {} vs base {} (slack {slack})",
            probe.rmse,
            base.rmse
        );
    }

    #[test]
    fn realized_cost_matches_ledger_prediction() {
        let cfg = RmseConstantCostConfig {
            n_grid: vec![200],
            batches: vec![2, 20],
            replicates: 5,
            paths: 3,
            cost_probe: false,
            bootstrap_resamples: 100,
            ..Default::default()
        };
        let result = run_rmse_constant_cost(&cfg, None).unwrap();
        for r in &result.rows {
            let expected = (r.steps as u64) * (r.batch as u64) * (5 * 3) as u64;
            assert_eq!(r.term_evals, expected);
        }
    }
}
