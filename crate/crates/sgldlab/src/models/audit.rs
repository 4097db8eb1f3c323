//! Empirical audit of the strong-convexity / Lipschitz assumptions and the
//! mode-scatter statistic controlling stochastic-gradient variance scaling.

use super::newton::find_term_mode;
use super::{find_mode, ModelError, ParamVector, PosteriorModel};
use crate::rng::RngStream;
use nalgebra::DVector;
use serde::Serialize;

/// Sampled estimates of the curvature constants and the mode-scatter
/// statistic (1/N) sum_i |x*_i - x*|^2.
#[derive(Debug, Clone, Serialize)]
pub struct ModelAssumptionReport {
    /// Empirical one-sided-Lipschitz lower bound m.
    pub strong_convexity_lower: f64,
    /// Empirical Lipschitz upper bound M.
    pub lipschitz_upper: f64,
    /// Max per-term Lipschitz estimate over audited terms.
    pub per_term_lipschitz_max: f64,
    /// Empirical mode scatter; finite value certifies the variance of the
    /// stochastic gradient scales as N(N-n)/n.
    pub mode_scatter: f64,
    /// Set when the model is not strongly log-concave globally (logistic),
    /// meaning the sampled m can be loose.
    pub wide_interval: bool,
}

/// Estimate m, M, the max per-term Lipschitz constant and the mode-scatter
/// statistic by sampling point pairs around the posterior mode.
///
/// `batch` bounds the number of per-term audits; terms beyond it are
/// subsampled, which leaves the scatter statistic unbiased.
pub fn audit_assumptions(
    model: &dyn PosteriorModel,
    sample_points: usize,
    batch: usize,
    seed: u64,
) -> Result<ModelAssumptionReport, ModelError> {
    assert!(sample_points >= 2, "need at least two sample points");
    let d = model.dim();
    let n_data = model.data_len();
    let mode = find_mode(model, 1e-10 * n_data as f64, 200)?;

    // Sampling scale from the curvature at the mode.
    let hess = model.hessian(&mode);
    let min_curv = hess
        .symmetric_eigenvalues()
        .iter()
        .map(|ev| -ev)
        .fold(f64::INFINITY, f64::min)
        .max(1e-12);
    let scale = (1.0 / min_curv).sqrt() * 3.0;

    let mut rng = RngStream::new(seed, crate::rng::STREAM_VALIDATE);
    let points: Vec<ParamVector> = (0..sample_points)
        .map(|_| {
            let mut p = mode.clone();
            let noise = rng.gaussian_noise(d);
            for (c, z) in p.components_mut().iter_mut().zip(noise) {
                *c += scale * z;
            }
            p
        })
        .collect();

    let grads: Vec<DVector<f64>> = points
        .iter()
        .map(|p| model.full_grad(p).map(|g| DVector::from_column_slice(g.as_slice())))
        .collect::<Result<_, _>>()?;

    let mut m_est = f64::INFINITY;
    let mut big_m_est: f64 = 0.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let dx = DVector::from_column_slice(points[i].as_slice())
                - DVector::from_column_slice(points[j].as_slice());
            let norm_sq = dx.norm_squared();
            if norm_sq < 1e-24 {
                continue;
            }
            let dg = &grads[i] - &grads[j];
            m_est = m_est.min(-dg.dot(&dx) / norm_sq);
            big_m_est = big_m_est.max(dg.norm() / norm_sq.sqrt());
        }
    }

    // Per-term quantities on a subsample of terms when N is large.
    let audited_terms: Vec<usize> = if n_data <= batch {
        (0..n_data).collect()
    } else {
        crate::rng::sample_without_replacement(n_data, batch, &mut rng)
            .expect("batch <= n_data")
            .indices()
            .to_vec()
    };

    let mut per_term_max: f64 = 0.0;
    let mut scatter_sum = 0.0;
    for &i in &audited_terms {
        for pair in points.windows(2) {
            let ga = model.term_potential_grad(i, &pair[0])?;
            let gb = model.term_potential_grad(i, &pair[1])?;
            let dist = pair[0].distance(&pair[1]);
            if dist > 1e-12 {
                per_term_max = per_term_max.max(ga.distance(&gb) / dist);
            }
        }
        let term_mode = find_term_mode(model, i, 1e-9, 500)?;
        let dev = term_mode.distance(&mode);
        scatter_sum += dev * dev;
    }
    let mode_scatter = scatter_sum / audited_terms.len() as f64;

    let wide_interval = model.stability_limit().is_none();
    Ok(ModelAssumptionReport {
        strong_convexity_lower: m_est.max(0.0),
        lipschitz_upper: big_m_est,
        per_term_lipschitz_max: per_term_max,
        mode_scatter,
        wide_interval,
    })
}
