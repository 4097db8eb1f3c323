//! Scalar abstraction for the closed-form numerics.
//!
//! The oracle recursions and estimator reductions are written against this
//! trait so they can be instantiated at `f32` or `f64`; the exhaustive
//! subsampling enumeration is additionally generic over exact rationals
//! (see `rng::enumerate_subsample_moments`).

use num_traits::{Float, FromPrimitive};
use std::fmt::Debug;
use std::iter::Sum;

/// Floating-point scalar used by the closed-form oracle and reductions.
pub trait Scalar: Float + FromPrimitive + Sum + Debug + Send + Sync + 'static {
    fn of_f64(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 conversion")
    }
    fn of_usize(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Neumaier-compensated sum. Keeps reductions schedule-independent at the
/// 1e-12 level when chunks are combined in a fixed order.
pub fn compensated_sum<S: Scalar>(values: impl IntoIterator<Item = S>) -> S {
    let mut sum = S::zero();
    let mut comp = S::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

/// Mean via compensated summation.
pub fn mean<S: Scalar>(values: &[S]) -> S {
    assert!(!values.is_empty(), "mean of empty slice");
    compensated_sum(values.iter().copied()) / S::of_usize(values.len())
}

/// Unbiased sample variance (denominator len - 1).
pub fn sample_variance<S: Scalar>(values: &[S]) -> S {
    assert!(values.len() >= 2, "variance needs at least two values");
    let m = mean(values);
    let ss = compensated_sum(values.iter().map(|&v| (v - m) * (v - m)));
    ss / S::of_usize(values.len() - 1)
}

/// Population variance (denominator len), clamped at zero.
pub fn population_variance<S: Scalar>(values: &[S]) -> S {
    assert!(!values.is_empty());
    let m = mean(values);
    let ss = compensated_sum(values.iter().map(|&v| (v - m) * (v - m)));
    (ss / S::of_usize(values.len())).max(S::zero())
}
