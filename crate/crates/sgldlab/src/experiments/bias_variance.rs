//! Bias and variance of the chain state as a function of batch size, at
//! fixed stepsize and horizon, on the conjugate Gaussian model, with the
//! analytic oracle curves alongside the simulated values.

use super::common::{fmt_float, write_csv, write_meta, ExperimentError};
use crate::estimators::{gaussian_expectation, Functional};
use crate::gradient::GradientScheme;
use crate::models::{generate_gaussian_data, GaussianConjugateModel};
use crate::oracle::{oracle_var_b, oracle_variance, OracleInputs};
use crate::sampler::{
    merged_ledger, run_paths, steps_for_horizon, DriftConvention, InitDistribution, RunConfig,
};
use crate::scalar::mean;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasVarianceConfig {
    pub n_data: usize,
    pub sigma_theta_sq: f64,
    pub sigma_y_sq: f64,
    pub data_mean: f64,
    pub h: f64,
    pub paths: usize,
    /// T = horizon_const * ln(1/eps) / N with eps = N^{-1/2}.
    pub horizon_const: f64,
    pub batches: Vec<usize>,
    pub theta0: f64,
    pub seed: u64,
}

impl Default for BiasVarianceConfig {
    fn default() -> Self {
        Self {
            n_data: 10_000,
            sigma_theta_sq: 1.0,
            sigma_y_sq: 1.0,
            data_mean: 1.0,
            h: 1e-5,
            paths: 10_000,
            horizon_const: 5.0,
            batches: vec![1, 10, 100, 1_000, 10_000],
            theta0: 0.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BiasVarianceRow {
    pub batch: usize,
    pub functional: String,
    pub bias_sq: f64,
    pub bias_sq_se: f64,
    /// Single-sample variance (variance of theta_M across paths).
    pub variance: f64,
    pub variance_se: f64,
    /// Variance of the P-path mean estimator (= variance / P).
    pub mean_variance: f64,
    pub oracle_bias_sq: f64,
    pub oracle_variance: f64,
    pub signed_bias: f64,
    pub signed_bias_se: f64,
    pub oracle_signed_bias: f64,
    pub term_evals: u64,
}

#[derive(Debug)]
pub struct BiasVarianceResult {
    pub rows: Vec<BiasVarianceRow>,
    pub steps: usize,
    pub horizon: f64,
}

pub fn run_bias_variance(
    config: &BiasVarianceConfig,
    out_dir: Option<&Path>,
) -> Result<BiasVarianceResult, ExperimentError> {
    let n_data = config.n_data;
    let data = generate_gaussian_data(n_data, config.data_mean, config.sigma_y_sq, config.seed);
    let model = GaussianConjugateModel::new(config.sigma_theta_sq, config.sigma_y_sq, data)?;
    let a = model.drift_a();
    let (mu_p, sigma_p_sq) = model.exact_posterior();

    let eps = 1.0 / (n_data as f64).sqrt();
    let horizon = config.horizon_const * (1.0 / eps).ln() / n_data as f64;
    let steps = steps_for_horizon(horizon, config.h);

    let sin_functional = Functional::AbsSinCentered { center: mu_p };
    let sin_reference = gaussian_expectation(&sin_functional, mu_p, sigma_p_sq, 4000);

    let mut rows = Vec::new();
    for &batch in &config.batches {
        if batch < 1 || batch > n_data {
            return Err(ExperimentError::InvalidConfig(format!(
                "batch {batch} out of range for N = {n_data}"
            )));
        }
        // The n = N row is the full-gradient scheme (identical chain law,
        // O(1) evaluation through the cached data sum).
        let scheme = if batch == n_data {
            GradientScheme::Full
        } else {
            GradientScheme::NaiveSubsample { batch }
        };
        let run = RunConfig {
            h: config.h,
            steps,
            paths: config.paths,
            seed: config.seed,
            convention: DriftConvention::Ou,
            init: InitDistribution::Point { position: vec![config.theta0] },
            allow_unstable: false,
        };
        let outputs = run_paths(&model, &scheme, &run)?;
        let term_evals = merged_ledger(&outputs).term_evals;
        let finals: Vec<f64> = outputs.iter().map(|o| o.final_state.as_scalar()).collect();
        let p = finals.len() as f64;

        let var_b = match &scheme {
            GradientScheme::Full => 0.0,
            _ => oracle_var_b(model.data(), config.sigma_y_sq, batch)?,
        };
        let oracle_inputs = OracleInputs {
            drift_a: a,
            mean_b: model.drift_b(),
            var_b,
            h: config.h,
            theta0_mean: config.theta0,
            theta0_var: 0.0,
            steps,
            paths: config.paths,
        };
        oracle_inputs.validate()?;
        let beta_m = (1.0 - a * config.h).powi(steps as i32);
        let oracle_signed_bias = beta_m * (config.theta0 - mu_p);
        let oracle_var = oracle_variance(&oracle_inputs);

        for (functional, reference, oracle_cols) in [
            (Functional::Coordinate { j: 0 }, mu_p, true),
            (sin_functional, sin_reference, false),
        ] {
            let values: Vec<f64> = finals.iter().map(|&x| functional.apply_scalar(x)).collect();
            let m = mean(&values);
            let var = crate::scalar::population_variance(&values);
            let se_m = (var / p).sqrt();
            let signed_bias = m - reference;
            let bias_sq = signed_bias * signed_bias;
            let bias_sq_se = 2.0 * signed_bias.abs() * se_m + se_m * se_m;
            // SE of the sample variance from the fourth central moment.
            let m4 = values.iter().map(|v| (v - m).powi(4)).sum::<f64>() / p;
            let variance_se = ((m4 - var * var).max(0.0) / p).sqrt();
            let (ob, ov) = if oracle_cols {
                (oracle_signed_bias * oracle_signed_bias, oracle_var)
            } else {
                (f64::NAN, f64::NAN)
            };
            rows.push(BiasVarianceRow {
                batch,
                functional: functional.label(),
                bias_sq,
                bias_sq_se,
                variance: var,
                variance_se,
                mean_variance: var / p,
                oracle_bias_sq: ob,
                oracle_variance: ov,
                signed_bias,
                signed_bias_se: se_m,
                oracle_signed_bias: if oracle_cols { oracle_signed_bias } else { f64::NAN },
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
                    r.functional.clone(),
                    fmt_float(r.bias_sq),
                    fmt_float(r.bias_sq_se),
                    fmt_float(r.variance),
                    fmt_float(r.variance_se),
                    fmt_float(r.oracle_bias_sq),
                    fmt_float(r.oracle_variance),
                    fmt_float(r.mean_variance),
                    fmt_float(r.signed_bias),
                    fmt_float(r.signed_bias_se),
                    fmt_float(r.oracle_signed_bias),
                    r.term_evals.to_string(),
                ]
            })
            .collect();
        write_csv(
            &dir.join("bias_variance.csv"),
            "n,func,bias_sq,bias_sq_se,variance,variance_se,oracle_bias_sq,oracle_variance,mean_variance,signed_bias,signed_bias_se,oracle_signed_bias,term_evals",
            csv_rows,
        )?;
        write_meta(
            dir,
            "bias-variance",
            config,
            serde_json::json!({
                "steps": steps,
                "horizon": horizon,
                "epsilon": eps,
                "drift_a": a,
                "posterior_mean": mu_p,
                "posterior_variance": sigma_p_sq,
            }),
        )?;
    }

    Ok(BiasVarianceResult { rows, steps, horizon })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> BiasVarianceConfig {
        BiasVarianceConfig {
            n_data: 100,
            h: 1e-3,
            paths: 4_000,
            batches: vec![1, 10, 100],
            ..Default::default()
        }
    }

    #[test]
    fn oracle_and_simulation_agree_at_small_scale() {
        let cfg = small_config();
        let result = run_bias_variance(&cfg, None).unwrap();
        for row in result.rows.iter().filter(|r| r.functional == "coord0") {
            // Signed bias within 4 SE of the oracle bias.
            let z = (row.signed_bias - row.oracle_signed_bias).abs() / row.signed_bias_se;
            assert!(z <= 4.0, "n={} z={z}", row.batch);
            // Variance within 5 SE of the oracle variance.
            let zv = (row.variance - row.oracle_variance).abs() / row.variance_se;
            assert!(zv <= 5.0, "n={} zv={zv}", row.batch);
        }
    }

    #[test]
    fn variance_increases_as_batch_shrinks() {
        let result = run_bias_variance(&small_config(), None).unwrap();
        let mut coord: Vec<(usize, f64)> = result
            .rows
            .iter()
            .filter(|r| r.functional == "coord0")
            .map(|r| (r.batch, r.oracle_variance))
            .collect();
        coord.sort_by_key(|&(n, _)| n);
        for pair in coord.windows(2) {
            assert!(pair[0].1 > pair[1].1, "oracle variance not decreasing in n: {coord:?}");
        }
    }

    #[test]
    fn csv_is_deterministic() {
        let cfg = BiasVarianceConfig {
            n_data: 50,
            h: 1e-3,
            paths: 200,
            batches: vec![1, 50],
            ..Default::default()
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run_bias_variance(&cfg, Some(d1.path())).unwrap();
        run_bias_variance(&cfg, Some(d2.path())).unwrap();
        let a = std::fs::read(d1.path().join("bias_variance.csv")).unwrap();
        let b = std::fs::read(d2.path().join("bias_variance.csv")).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn rejects_bad_batch() {
        let cfg = BiasVarianceConfig {
            n_data: 10,
            batches: vec![11],
            paths: 10,
            h: 1e-3,
            ..Default::default()
        };
        assert!(run_bias_variance(&cfg, None).is_err());
    }
}
