//! Euler-Maruyama integrator for (stochastic-gradient) Langevin dynamics,
//! with deterministic per-path random streams and an optional coupled
//! coarse/fine pair for Richardson-Romberg extrapolation.
//!
//! Two drift conventions are supported and must match the model's gradient
//! convention: `Langevin` pairs `grad log posterior` with `sqrt(2h)` noise,
//! `Ou` pairs the rescaled drift with `sqrt(h)` noise.

use crate::gradient::{estimate_gradient, CostLedger, GradientError, GradientScheme};
use crate::models::{ParamVector, PosteriorModel};
use crate::rng::{RngStream, SubsetSampler, STREAM_RR_COARSE, STREAM_RR_FINE};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A state beyond this norm is declared divergent.
const DIVERGENCE_NORM: f64 = 1e10;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Gradient(#[from] GradientError),
    #[error("stepsize {h} at or beyond stability limit {limit}; pass allow_unstable to override")]
    Unstable { h: f64, limit: f64 },
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftConvention {
    /// Drift `grad log posterior`, noise `sqrt(2h)`.
    Langevin,
    /// Rescaled drift (e.g. `-A x + B`), noise `sqrt(h)`.
    Ou,
}

impl DriftConvention {
    pub fn noise_scale(self, h: f64) -> f64 {
        match self {
            DriftConvention::Langevin => (2.0 * h).sqrt(),
            DriftConvention::Ou => h.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitDistribution {
    Point { position: Vec<f64> },
    Gaussian { mean: Vec<f64>, variance: f64 },
}

impl InitDistribution {
    fn draw(&self, rng: &mut RngStream) -> ParamVector {
        match self {
            InitDistribution::Point { position } => {
                ParamVector::new(position.clone()).expect("finite init")
            }
            InitDistribution::Gaussian { mean, variance } => {
                let sd = variance.sqrt();
                let z = rng.gaussian_noise(mean.len());
                ParamVector::new(mean.iter().zip(z).map(|(m, z)| m + sd * z).collect())
                    .expect("finite init")
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InitDistribution::Point { position } => position.len(),
            InitDistribution::Gaussian { mean, .. } => mean.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub h: f64,
    /// Number of Euler steps M (use [`steps_for_horizon`] to go from a
    /// continuous horizon T).
    pub steps: usize,
    /// Number of independent paths P.
    pub paths: usize,
    pub seed: u64,
    pub convention: DriftConvention,
    pub init: InitDistribution,
    /// Skip the stability check (used to demonstrate divergence).
    #[serde(default)]
    pub allow_unstable: bool,
}

/// M = ceil(T / h).
pub fn steps_for_horizon(t: f64, h: f64) -> usize {
    assert!(t > 0.0 && h > 0.0);
    (t / h).ceil() as usize
}

impl RunConfig {
    pub fn validate(&self, model: &dyn PosteriorModel) -> Result<(), SamplerError> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(SamplerError::InvalidConfig(format!("h must be positive, got {}", self.h)));
        }
        if self.paths < 1 || self.steps < 1 {
            return Err(SamplerError::InvalidConfig("need at least one path and one step".into()));
        }
        if self.init.dim() != model.dim() {
            return Err(SamplerError::InvalidConfig(format!(
                "init dimension {} does not match model dimension {}",
                self.init.dim(),
                model.dim()
            )));
        }
        if !self.allow_unstable {
            if let Some(limit) = model.stability_limit() {
                if self.h >= limit {
                    return Err(SamplerError::Unstable { h: self.h, limit });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PathOutput {
    pub final_state: ParamVector,
    /// Step index at which the path left the finite region, if it did; the
    /// state is frozen at the last finite iterate.
    pub diverged_at: Option<usize>,
    pub ledger: CostLedger,
}

fn diverged(x: &ParamVector) -> bool {
    !x.is_finite() || x.norm() > DIVERGENCE_NORM
}

/// Integrate a single path. Path `p` owns random stream `p`: the init draw,
/// the Gaussian noise and (for subsampling schemes) the subset draws all
/// come from it, so the path is a pure function of (seed, p, config).
pub fn run_path(
    model: &dyn PosteriorModel,
    scheme: &GradientScheme,
    config: &RunConfig,
    path_id: u64,
) -> Result<PathOutput, SamplerError> {
    let d = model.dim();
    let mut rng = RngStream::new(config.seed, path_id);
    let mut subsets = SubsetSampler::new(model.data_len());
    let mut ledger = CostLedger::new();
    let noise_scale = config.convention.noise_scale(config.h);

    let mut x = self::InitDistribution::draw(&config.init, &mut rng);
    let mut diverged_at = None;
    for k in 0..config.steps {
        let g = estimate_gradient(model, scheme, &x, &mut subsets, &mut rng, &mut ledger)?;
        let noise = rng.gaussian_noise(d);
        ledger.steps += 1;
        ledger.noise_draws += d as u64;
        let mut next = x.clone();
        next.add_scaled(config.h, &g);
        for (c, z) in next.components_mut().iter_mut().zip(&noise) {
            *c += noise_scale * z;
        }
        if diverged(&next) {
            diverged_at = Some(k);
            break;
        }
        x = next;
    }
    Ok(PathOutput { final_state: x, diverged_at, ledger })
}

/// Integrate P independent paths in parallel. Output is bit-identical for
/// any worker count because each path owns its stream and the outputs are
/// collected in path order.
pub fn run_paths(
    model: &dyn PosteriorModel,
    scheme: &GradientScheme,
    config: &RunConfig,
) -> Result<Vec<PathOutput>, SamplerError> {
    config.validate(model)?;
    (0..config.paths as u64)
        .into_par_iter()
        .map(|p| run_path(model, scheme, config, p))
        .collect()
}

/// Merged evaluation counters over a set of paths.
pub fn merged_ledger(outputs: &[PathOutput]) -> CostLedger {
    let mut total = CostLedger::new();
    for o in outputs {
        total.merge(&o.ledger);
    }
    total
}

#[derive(Debug, Clone)]
pub struct RrPairOutput {
    /// Final state of the fine chain (step h/2, 2M steps).
    pub fine: ParamVector,
    /// Final state of the coarse chain (step h, M steps).
    pub coarse: ParamVector,
    pub diverged: bool,
    pub ledger: CostLedger,
}

/// One coupled coarse/fine pair for Richardson-Romberg extrapolation.
///
/// Both chains share the Brownian increments: per coarse step the fine
/// chain advances twice with noises xi', xi'' and the coarse chain once
/// with (xi' + xi'')/sqrt(2). Subset draws are independent between the two
/// chains (streams `STREAM_RR_FINE + p` and `STREAM_RR_COARSE + p`); both
/// start from the same initial draw.
pub fn run_rr_pair(
    model: &dyn PosteriorModel,
    scheme_fine: &GradientScheme,
    scheme_coarse: &GradientScheme,
    config: &RunConfig,
    path_id: u64,
) -> Result<RrPairOutput, SamplerError> {
    let d = model.dim();
    let mut noise_rng = RngStream::new(config.seed, path_id);
    let mut fine_rng = RngStream::new(config.seed, STREAM_RR_FINE + path_id);
    let mut coarse_rng = RngStream::new(config.seed, STREAM_RR_COARSE + path_id);
    let mut fine_subsets = SubsetSampler::new(model.data_len());
    let mut coarse_subsets = SubsetSampler::new(model.data_len());
    let mut ledger = CostLedger::new();

    let h = config.h;
    let half = h / 2.0;
    let scale_fine = config.convention.noise_scale(half);
    let scale_coarse = config.convention.noise_scale(h);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;

    let init = self::InitDistribution::draw(&config.init, &mut noise_rng);
    let mut fine = init.clone();
    let mut coarse = init;
    let mut has_diverged = false;

    'outer: for _ in 0..config.steps {
        let xi1 = noise_rng.gaussian_noise(d);
        let xi2 = noise_rng.gaussian_noise(d);
        ledger.noise_draws += 2 * d as u64;

        for xi in [&xi1, &xi2] {
            let g = estimate_gradient(
                model,
                scheme_fine,
                &fine,
                &mut fine_subsets,
                &mut fine_rng,
                &mut ledger,
            )?;
            ledger.steps += 1;
            fine.add_scaled(half, &g);
            for (c, z) in fine.components_mut().iter_mut().zip(xi.iter()) {
                *c += scale_fine * z;
            }
            if diverged(&fine) {
                has_diverged = true;
                break 'outer;
            }
        }

        let g = estimate_gradient(
            model,
            scheme_coarse,
            &coarse,
            &mut coarse_subsets,
            &mut coarse_rng,
            &mut ledger,
        )?;
        ledger.steps += 1;
        coarse.add_scaled(h, &g);
        for (c, (z1, z2)) in coarse.components_mut().iter_mut().zip(xi1.iter().zip(&xi2)) {
            *c += scale_coarse * (z1 + z2) * inv_sqrt2;
        }
        if diverged(&coarse) {
            has_diverged = true;
            break;
        }
    }

    Ok(RrPairOutput { fine, coarse, diverged: has_diverged, ledger })
}

/// P independent RR pairs in parallel.
pub fn run_rr_pairs(
    model: &dyn PosteriorModel,
    scheme_fine: &GradientScheme,
    scheme_coarse: &GradientScheme,
    config: &RunConfig,
) -> Result<Vec<RrPairOutput>, SamplerError> {
    config.validate(model)?;
    (0..config.paths as u64)
        .into_par_iter()
        .map(|p| run_rr_pair(model, scheme_fine, scheme_coarse, config, p))
        .collect()
}
