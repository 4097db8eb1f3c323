//! Damped Newton mode finding.

use super::{ModelError, ParamVector, PosteriorModel};
use nalgebra::DVector;

/// Posterior mode x* with |full_grad(x*)| <= tol.
///
/// Gaussian models resolve in closed form; otherwise full Newton with the
/// Hessian assembled from per-datum terms and step halving until the log
/// posterior does not decrease.
pub fn find_mode(
    model: &dyn PosteriorModel,
    tol: f64,
    max_iter: usize,
) -> Result<ParamVector, ModelError> {
    assert!(tol > 0.0, "tolerance must be positive");
    if let Some(mode) = model.exact_mode() {
        return Ok(mode);
    }
    newton(
        ParamVector::zeros(model.dim()),
        tol,
        max_iter,
        |x| model.full_grad(x),
        |x| model.hessian(x),
        |x| model.log_posterior(x),
    )
}

/// Mode of the single term U_i (prior split included); used by the
/// assumption audit.
pub(crate) fn find_term_mode(
    model: &dyn PosteriorModel,
    i: usize,
    tol: f64,
    max_iter: usize,
) -> Result<ParamVector, ModelError> {
    newton(
        ParamVector::zeros(model.dim()),
        tol,
        max_iter,
        |x| model.term_potential_grad(i, x),
        |x| model.term_potential_hessian(i, x),
        |x| model.term_potential_value(i, x),
    )
}

fn newton(
    start: ParamVector,
    tol: f64,
    max_iter: usize,
    grad: impl Fn(&ParamVector) -> Result<ParamVector, ModelError>,
    hess: impl Fn(&ParamVector) -> nalgebra::DMatrix<f64>,
    value: impl Fn(&ParamVector) -> f64,
) -> Result<ParamVector, ModelError> {
    let mut x = start;
    let mut g = grad(&x)?;
    for _ in 0..max_iter {
        if g.norm() <= tol {
            return Ok(x);
        }
        let h = hess(&x);
        let g_vec = DVector::from_column_slice(g.as_slice());
        // Newton direction: solve H delta = -g. H is negative definite for
        // log-concave targets; fall back to a plain ascent step if singular.
        let direction = match h.lu().solve(&(-&g_vec)) {
            Some(d) if d.iter().all(|v| v.is_finite()) => d,
            _ => g_vec.clone(),
        };
        let f0 = value(&x);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let mut cand = x.clone();
            for (c, d) in cand.components_mut().iter_mut().zip(direction.iter()) {
                *c += t * d;
            }
            // Tolerate machine-precision flatness near the mode so the line
            // search does not stall one ulp short of the tolerance.
            if cand.is_finite() && value(&cand) >= f0 - 1e-12 * f0.abs().max(1.0) {
                x = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        g = grad(&x)?;
    }
    let grad_norm = g.norm();
    if grad_norm <= tol {
        Ok(x)
    } else {
        Err(ModelError::ConvergenceFailure { iters: max_iter, grad_norm, last: x })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{generate_logreg_data, GaussianConjugateModel, LogisticRegressionModel};

    #[test]
    fn gaussian_mode_is_posterior_mean() {
        let m = GaussianConjugateModel::new(2.0, 3.0, vec![1.0, 2.0, 3.0]).unwrap();
        let mode = find_mode(&m, 1e-12, 100).unwrap();
        assert!((mode.as_scalar() - m.exact_posterior().0).abs() < 1e-14);
    }

    #[test]
    fn logistic_mode_satisfies_gradient_tolerance() {
        let m = generate_logreg_data(3, 1000, 10.0, 11).unwrap();
        let mode = find_mode(&m, 1e-8, 100).unwrap();
        let g = m.full_grad(&mode).unwrap();
        assert!(g.norm() <= 1e-8, "gradient norm {}", g.norm());
    }

    #[test]
    fn logistic_all_zero_labels_still_has_mode() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![1.0 + 0.1 * i as f64, (i as f64).cos()])
            .collect();
        let m = LogisticRegressionModel::new(rows, vec![0; 30], 5.0).unwrap();
        let mode = find_mode(&m, 1e-9, 200).unwrap();
        assert!(m.full_grad(&mode).unwrap().norm() <= 1e-9);
    }

    #[test]
    fn reports_convergence_failure() {
        let m = generate_logreg_data(2, 100, 10.0, 3).unwrap();
        let err = find_mode(&m, 1e-300, 1).unwrap_err();
        assert!(matches!(err, ModelError::ConvergenceFailure { .. }));
    }

    #[test]
    fn per_term_modes_converge() {
        let m = generate_logreg_data(3, 20, 10.0, 13).unwrap();
        for i in 0..20 {
            let mode = find_term_mode(&m, i, 1e-8, 500).unwrap();
            assert!(m.term_potential_grad(i, &mode).unwrap().norm() <= 1e-8);
        }
    }
}
