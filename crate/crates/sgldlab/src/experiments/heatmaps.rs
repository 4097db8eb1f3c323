//! Relative-bias heatmaps of the stationary variance estimator over a
//! (batch fraction, stepsize fraction) grid on the Gaussian model, oracle
//! exact, with a handful of simulation spot checks. Both grids are powers
//! of two so constant-cost contours (n/h fixed) hit grid cells exactly.

use super::common::{fmt_float, write_csv, write_meta, ExperimentError};
use crate::gradient::GradientScheme;
use crate::models::{generate_gaussian_data, GaussianConjugateModel};
use crate::oracle::{oracle_rr_variance_bias, oracle_var_b, oracle_variance, OracleInputs};
use crate::rng::RngStream;
use crate::sampler::{
    run_paths, run_rr_pairs, DriftConvention, InitDistribution, RunConfig,
};
use crate::scalar::population_variance;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatmapConfig {
    pub n_data: usize,
    pub sigma_theta_sq: f64,
    pub sigma_y_sq: f64,
    pub data_mean: f64,
    /// Batch fractions phi = 2^k for these (non-positive) exponents.
    pub batch_fraction_log2: Vec<i32>,
    /// Stepsize fractions r = 2^k, h = r/A, for these negative exponents.
    pub r_log2: Vec<i32>,
    /// Richardson-Romberg extrapolated estimator instead of the plain one.
    pub rr: bool,
    /// Cells simulated as spot checks, as (batch exponent, r exponent).
    pub spot_cells: Vec<(i32, i32)>,
    pub spot_paths: usize,
    /// Relaxation steps per spot check: M = ceil(spot_relax / r).
    pub spot_relax: f64,
    pub seed: u64,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            n_data: 1_000_000,
            sigma_theta_sq: 1.0,
            sigma_y_sq: 1.0,
            data_mean: 1.0,
            batch_fraction_log2: (-10..=0).rev().collect(),
            r_log2: (-7..=-1).rev().collect(),
            rr: false,
            spot_cells: vec![(0, -1), (-10, -1), (-10, -2), (-10, -3), (-7, -1)],
            spot_paths: 1_000,
            spot_relax: 4.0,
            seed: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HeatmapCell {
    pub phi_log2: i32,
    pub r_log2: i32,
    pub batch: usize,
    pub h: f64,
    pub rel_bias: f64,
    /// Contour key: log2(phi) - log2(r); equal key means equal n/h up to
    /// batch rounding.
    pub contour_key: i32,
    pub sim_rel_bias: f64,
    pub sim_se: f64,
    pub sim_z: f64,
    pub term_evals: u64,
}

#[derive(Debug)]
pub struct HeatmapResult {
    pub cells: Vec<HeatmapCell>,
    pub posterior_variance: f64,
}

fn batch_for(phi_log2: i32, n_data: usize) -> usize {
    let phi = 2f64.powi(phi_log2);
    ((phi * n_data as f64).round() as usize).clamp(1, n_data)
}

pub fn run_heatmap(
    config: &HeatmapConfig,
    out_dir: Option<&Path>,
) -> Result<HeatmapResult, ExperimentError> {
    for &r in &config.r_log2 {
        if r >= 0 {
            return Err(ExperimentError::InvalidConfig(format!(
                "r exponent {r} gives r >= 1 (unstable)"
            )));
        }
    }
    let n_data = config.n_data;
    let data = generate_gaussian_data(n_data, config.data_mean, config.sigma_y_sq, config.seed);
    let model = GaussianConjugateModel::new(config.sigma_theta_sq, config.sigma_y_sq, data)?;
    let a = model.drift_a();
    let (mu_p, sigma_p_sq) = model.exact_posterior();

    let mut cells = Vec::new();
    for &phi_log2 in &config.batch_fraction_log2 {
        let batch = batch_for(phi_log2, n_data);
        let var_b = oracle_var_b(model.data(), config.sigma_y_sq, batch)?;
        for &r_exp in &config.r_log2 {
            let r = 2f64.powi(r_exp);
            let h = r / a;
            let rel_bias = if config.rr {
                oracle_rr_variance_bias(a, h, var_b).1 / sigma_p_sq
            } else {
                oracle_rr_variance_bias(a, h, var_b).0 / sigma_p_sq
            };
            let mut cell = HeatmapCell {
                phi_log2,
                r_log2: r_exp,
                batch,
                h,
                rel_bias,
                contour_key: phi_log2 - r_exp,
                sim_rel_bias: f64::NAN,
                sim_se: f64::NAN,
                sim_z: f64::NAN,
                term_evals: 0,
            };
            if config.spot_cells.contains(&(phi_log2, r_exp)) {
                simulate_spot(&model, config, &mut cell, mu_p, sigma_p_sq)?;
            }
            cells.push(cell);
        }
    }

    if let Some(dir) = out_dir {
        let csv_rows: Vec<Vec<String>> = cells
            .iter()
            .map(|c| {
                vec![
                    format!("{:+04}", c.phi_log2),
                    format!("{:+04}", c.r_log2),
                    format!("{:010}", c.batch),
                    fmt_float(c.h),
                    if c.batch == n_data { "full".into() } else { format!("naive-{}", c.batch) },
                    fmt_float(c.rel_bias),
                    fmt_float(c.batch as f64 / c.h),
                    format!("{:+04}", c.contour_key),
                    fmt_float(c.sim_rel_bias),
                    fmt_float(c.sim_se),
                    fmt_float(c.sim_z),
                    c.term_evals.to_string(),
                ]
            })
            .collect();
        let name = if config.rr { "rr_heatmap.csv" } else { "relbias_heatmap.csv" };
        write_csv(
            &dir.join(name),
            "phi_log2,r_log2,n,h,scheme,rel_bias,cost,contour_key,sim_rel_bias,sim_se,sim_z,term_evals",
            csv_rows,
        )?;
        write_meta(
            dir,
            if config.rr { "rr-heatmap" } else { "relbias-heatmap" },
            config,
            serde_json::json!({
                "drift_a": a,
                "posterior_variance": sigma_p_sq,
            }),
        )?;
    }

    Ok(HeatmapResult { cells, posterior_variance: sigma_p_sq })
}

/// Simulate the cell and fill in the z-score against the finite-M oracle
/// moments (chains start from the exact posterior and relax for M steps,
/// so the finite-M recursion value is the exact reference).
fn simulate_spot(
    model: &GaussianConjugateModel,
    config: &HeatmapConfig,
    cell: &mut HeatmapCell,
    mu_p: f64,
    sigma_p_sq: f64,
) -> Result<(), ExperimentError> {
    let a = model.drift_a();
    let n_data = model.data().len();
    let r = 2f64.powi(cell.r_log2);
    let steps = (config.spot_relax / r).ceil() as usize;
    let init = InitDistribution::Gaussian { mean: vec![mu_p], variance: sigma_p_sq };
    let run = RunConfig {
        h: cell.h,
        steps,
        paths: config.spot_paths,
        seed: config.seed,
        convention: DriftConvention::Ou,
        init,
        allow_unstable: false,
    };
    let scheme_for = |batch: usize| {
        if batch == n_data {
            GradientScheme::Full
        } else {
            GradientScheme::NaiveSubsample { batch }
        }
    };
    let var_b = oracle_var_b(model.data(), model.sigma_y_sq(), cell.batch)?;
    let oracle_inputs = |h: f64, var_b: f64, steps: usize| OracleInputs {
        drift_a: a,
        mean_b: model.drift_b(),
        var_b,
        h,
        theta0_mean: mu_p,
        theta0_var: sigma_p_sq,
        steps,
        paths: config.spot_paths,
    };

    if config.rr {
        // Constant-cost pair: the fine chain halves the batch (and so
        // doubles Var(B)) while halving the step.
        let fine_batch = (cell.batch / 2).max(1);
        let var_b_fine = oracle_var_b(model.data(), model.sigma_y_sq(), fine_batch)?;
        let outputs = run_rr_pairs(
            model,
            &scheme_for(fine_batch),
            &scheme_for(cell.batch),
            &run,
        )?;
        assert!(outputs.iter().all(|o| !o.diverged));
        for o in &outputs {
            cell.term_evals += o.ledger.term_evals;
        }
        let fine: Vec<f64> = outputs.iter().map(|o| o.fine.as_scalar()).collect();
        let coarse: Vec<f64> = outputs.iter().map(|o| o.coarse.as_scalar()).collect();
        let statistic =
            2.0 * population_variance(&fine) - population_variance(&coarse);
        let expected = 2.0 * oracle_variance(&oracle_inputs(cell.h / 2.0, var_b_fine, 2 * steps))
            - oracle_variance(&oracle_inputs(cell.h, var_b, steps));
        // Bootstrap the coupled pair statistic over paths.
        let mut rng = RngStream::new(config.seed, crate::rng::STREAM_BOOTSTRAP);
        let p = fine.len();
        let resampled: Vec<f64> = (0..500)
            .map(|_| {
                let idx: Vec<usize> = (0..p).map(|_| rng.below(p)).collect();
                let f: Vec<f64> = idx.iter().map(|&i| fine[i]).collect();
                let c: Vec<f64> = idx.iter().map(|&i| coarse[i]).collect();
                2.0 * population_variance(&f) - population_variance(&c)
            })
            .collect();
        let se = population_variance(&resampled).sqrt();
        cell.sim_rel_bias = (statistic - sigma_p_sq) / sigma_p_sq;
        cell.sim_se = se / sigma_p_sq;
        cell.sim_z = (statistic - expected) / se;
    } else {
        let outputs = run_paths(model, &scheme_for(cell.batch), &run)?;
        for o in &outputs {
            cell.term_evals += o.ledger.term_evals;
        }
        let finals: Vec<f64> = outputs.iter().map(|o| o.final_state.as_scalar()).collect();
        let v_hat = population_variance(&finals);
        let v_oracle = oracle_variance(&oracle_inputs(cell.h, var_b, steps));
        let se = v_oracle * (2.0 / (finals.len() as f64 - 1.0)).sqrt();
        cell.sim_rel_bias = (v_hat - sigma_p_sq) / sigma_p_sq;
        cell.sim_se = se / sigma_p_sq;
        cell.sim_z = (v_hat - v_oracle) / se;
    }
    Ok(())
}
