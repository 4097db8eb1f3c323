//! Deterministic splittable random streams and subsampling without
//! replacement.
//!
//! Streams are built on ChaCha8, a counter-based generator: the triple
//! (seed, stream id, counter) fully determines every draw, so results are
//! bit-identical under any parallel schedule as long as each worker owns
//! its stream.
//!
//! Stream id convention: path `p` uses stream id `p`. Reserved high ids:
//! [`STREAM_BOOTSTRAP`], [`STREAM_VALIDATE`], and the RR subset offsets
//! [`STREAM_RR_COARSE`] / [`STREAM_RR_FINE`].

use itertools::Itertools;
use num_traits::{FromPrimitive, NumAssign};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Bootstrap resampling stream.
pub const STREAM_BOOTSTRAP: u64 = 1 << 63;
/// Validation battery / auxiliary oracle stream.
pub const STREAM_VALIDATE: u64 = 1 << 62;
/// Subset draws for the coarse chain of an RR pair running as path `p`
/// use `STREAM_RR_COARSE + p`.
pub const STREAM_RR_COARSE: u64 = 1 << 61;
/// Subset draws for the fine chain of an RR pair.
pub const STREAM_RR_FINE: u64 = (1 << 61) + (1 << 60);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SubsampleError {
    #[error("batch size {n} out of range for N = {total}")]
    BatchOutOfRange { n: usize, total: usize },
    #[error("exhaustive enumeration infeasible for N = {total} > 20")]
    EnumerationGuard { total: usize },
}

/// A deterministic random stream, identified by (seed, stream_id).
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Position of the stream in 32-bit words since creation.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    pub fn below(&mut self, m: usize) -> usize {
        self.rng.gen_range(0..m)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// `d` i.i.d. standard normal components.
    pub fn gaussian_noise(&mut self, d: usize) -> Vec<f64> {
        assert!(d >= 1);
        (0..d).map(|_| self.standard_normal()).collect()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// A size-n subset of [0, N), all indices distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetIndex {
    indices: Vec<usize>,
}

impl SubsetIndex {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Reusable uniform without-replacement sampler over [0, N).
///
/// Partial Fisher-Yates over a persistent index array; the swaps of each
/// draw are undone afterwards, so a draw costs O(n) after the one-time
/// O(N) setup.
#[derive(Debug, Clone)]
pub struct SubsetSampler {
    perm: Vec<usize>,
    swaps: Vec<usize>,
}

impl SubsetSampler {
    pub fn new(total: usize) -> Self {
        Self { perm: (0..total).collect(), swaps: Vec::new(), }
    }

    pub fn total(&self) -> usize {
        self.perm.len()
    }

    /// Draw a uniform size-n subset; the slice is valid until the next draw.
    pub fn draw(&mut self, n: usize, rng: &mut RngStream) -> Result<&[usize], SubsampleError> {
        let total = self.perm.len();
        if n < 1 || n > total {
            return Err(SubsampleError::BatchOutOfRange { n, total });
        }
        // Undo the previous draw's swaps to restore the identity layout.
        for i in (0..self.swaps.len()).rev() {
            self.perm.swap(i, self.swaps[i]);
        }
        self.swaps.clear();
        for i in 0..n {
            let j = i + rng.below(total - i);
            self.perm.swap(i, j);
            self.swaps.push(j);
        }
        Ok(&self.perm[..n])
    }
}

/// Uniform size-n subset of [0, N) without replacement.
pub fn sample_without_replacement(
    total: usize,
    n: usize,
    rng: &mut RngStream,
) -> Result<SubsetIndex, SubsampleError> {
    let mut sampler = SubsetSampler::new(total);
    let indices = sampler.draw(n, rng)?.to_vec();
    Ok(SubsetIndex { indices })
}

/// Exact mean and scalar variance (trace of covariance) of the
/// without-replacement estimator `(N/n) * sum_{i in tau} a_i`, by exhaustive
/// enumeration of all C(N, n) subsets.
///
/// Generic over the scalar so it can run in exact rational arithmetic.
pub fn enumerate_subsample_moments<T>(
    values: &[Vec<T>],
    n: usize,
) -> Result<(Vec<T>, T), SubsampleError>
where
    T: NumAssign + FromPrimitive + Clone,
{
    let total = values.len();
    if total > 20 {
        return Err(SubsampleError::EnumerationGuard { total });
    }
    if n < 1 || n > total {
        return Err(SubsampleError::BatchOutOfRange { n, total });
    }
    let dim = values[0].len();
    let scale = T::from_usize(total).unwrap() / T::from_usize(n).unwrap();

    let estimate_for = |subset: &[usize]| {
        let mut estimate = vec![T::zero(); dim];
        for &i in subset {
            for (e, a) in estimate.iter_mut().zip(&values[i]) {
                *e += a.clone();
            }
        }
        for e in estimate.iter_mut() {
            *e *= scale.clone();
        }
        estimate
    };

    let mut count = T::zero();
    let mut mean = vec![T::zero(); dim];
    for subset in (0..total).combinations(n) {
        for (m, e) in mean.iter_mut().zip(estimate_for(&subset)) {
            *m += e;
        }
        count += T::one();
    }
    for m in mean.iter_mut() {
        *m /= count.clone();
    }
    // Second, centered pass: avoids the catastrophic cancellation of
    // E[X^2] - E[X]^2 at floating point.
    let mut variance = T::zero();
    for subset in (0..total).combinations(n) {
        for (e, m) in estimate_for(&subset).into_iter().zip(&mean) {
            let dev = e - m.clone();
            variance += dev.clone() * dev;
        }
    }
    variance /= count;
    Ok((mean, variance))
}
