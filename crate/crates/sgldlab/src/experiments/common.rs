//! Shared plumbing for the experiment drivers: deterministic CSV emission,
//! config hashing and `meta.json` output.
//!
//! Every output file is a pure function of (config, seed): rows are sorted
//! by a canonical key and floats are printed with a fixed format, so reruns
//! and different worker counts produce identical bytes.

use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    Sampler(#[from] crate::sampler::SamplerError),
    #[error(transparent)]
    Gradient(#[from] crate::gradient::GradientError),
    #[error(transparent)]
    Oracle(#[from] crate::oracle::OracleError),
    #[error(transparent)]
    Mh(#[from] crate::mh::MhError),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
}

/// Fixed float format for CSV cells: round-trippable and deterministic.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.12e}")
    }
}

/// Write a CSV with the given header after sorting rows lexicographically
/// (rows carry their own canonical key as the leading columns).
pub fn write_csv(
    path: &Path,
    header: &str,
    mut rows: Vec<Vec<String>>,
) -> Result<(), ExperimentError> {
    rows.sort();
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// FNV-1a 64-bit hash of the canonical JSON encoding, as a hex digest.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String, ExperimentError> {
    let canonical = serde_json::to_string(config)?;
    let mut h: u64 = 0xcbf29ce484222325;
    for b in canonical.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    Ok(format!("{h:016x}"))
}

/// Emit `meta.json` next to the experiment CSVs: experiment name, the full
/// config echo, its hash and experiment-specific realized values.
pub fn write_meta<T: Serialize>(
    dir: &Path,
    experiment: &str,
    config: &T,
    realized: serde_json::Value,
) -> Result<(), ExperimentError> {
    let meta = serde_json::json!({
        "experiment": experiment,
        "config": serde_json::to_value(config)?,
        "config_hash": config_hash(config)?,
        "realized": realized,
    });
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// RMSE over per-replicate squared errors with a bootstrap standard error
/// mapped through the square root by the delta method.
pub fn rmse_with_se(sq_errors: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    let mse = crate::scalar::mean(sq_errors);
    let rmse = mse.sqrt();
    let se_mse = crate::estimators::bootstrap_se(sq_errors, resamples, seed);
    let se = if rmse > 0.0 { se_mse / (2.0 * rmse) } else { 0.0 };
    (rmse, se)
}

/// Ordinary least squares slope of y against x.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert!(xs.len() == ys.len() && xs.len() >= 2);
    let mx = crate::scalar::mean(xs);
    let my = crate::scalar::mean(ys);
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}
