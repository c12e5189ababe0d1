//! Stable scalar/vector primitives and the seeded random-stream contract.
//!
//! Every random draw in the crate goes through [`RngStream`], a ChaCha8
//! generator addressed by a `(seed, stream id)` pair. ChaCha output is
//! specified bit-for-bit, so the same pair yields the same sequence on every
//! platform, and distinct stream ids never overlap.

use ndarray::Array2;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};

/// Lower clamp applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Deterministic random stream derived from a 64-bit seed and a stream id.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::derive(seed, 0)
    }

    /// Independent stream `stream` of `seed`.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngStream {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// `ln Σ exp(vᵢ)` with a max shift.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Domain("log_sum_exp of an empty vector".into()));
    }
    Ok(log_sum_exp_unchecked(v))
}

pub(crate) fn log_sum_exp_unchecked(v: &[f64]) -> f64 {
    let (max, tail) = lse_parts(v);
    max + tail
}

/// `ln Σ exp(vᵢ) − v[k]` without cancellation when `v[k]` is the maximum.
pub(crate) fn log_sum_exp_minus(v: &[f64], k: usize) -> f64 {
    let (max, tail) = lse_parts(v);
    (max - v[k]) + tail
}

// (max, ln(1 + Σ_{i≠argmax} exp(vᵢ − max))); log1p keeps tiny tails exact.
fn lse_parts(v: &[f64]) -> (f64, f64) {
    let top = argmax(v);
    let max = v[top];
    let rest: f64 = v
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, &x)| (x - max).exp())
        .sum();
    (max, rest.ln_1p())
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in z.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in z.iter_mut() {
        *x /= sum;
    }
}

pub fn sample_standard_normal(rng: &mut RngStream, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.standard_normal()).collect()
}

/// Glorot-uniform matrix of shape `fan_in × fan_out`.
pub fn glorot_uniform(rng: &mut RngStream, fan_in: usize, fan_out: usize) -> Result<Array2<f64>> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::Domain(format!(
            "glorot_uniform needs non-zero fans, got {fan_in}x{fan_out}"
        )));
    }
    let limit = glorot_limit(fan_in, fan_out);
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite positive limit");
    Ok(Array2::from_shape_simple_fn((fan_in, fan_out), || {
        dist.sample(rng)
    }))
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Mean and standard error of the mean (sample standard deviation / √n).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
