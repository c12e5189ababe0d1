//! Bi-tempered logistic loss.
//!
//! The tempered exponential `exp_t(x) = [1 + (1−t)x]₊^{1/(1−t)}` replaces the
//! softmax exponential (temperature `t2`, heavy-tailed for `t2 > 1`) and the
//! tempered logarithm `log_t(x) = (x^{1−t} − 1)/(1−t)` replaces the log in the
//! loss (temperature `t1`, bounded for `t1 < 1`). `t = 1` is the ordinary pair.
//!
//! The tempered softmax `ŷᵢ = exp_t(zᵢ − λ)` has no closed-form normalizer, so
//! `λ` is solved from `Σ exp_t(zᵢ − λ) = 1`. The left side is convex and
//! decreasing in `λ`, so Newton's method started at `λ = max z` (where the
//! sum is ≥ 1) climbs monotonically to the root; a bisection fallback keeps
//! every iterate inside the bracket `[max z, max z − log_t(1/c)]`.
//!
//! With `wᵢ = ŷᵢ^t` the derivative `∂exp_t/∂x`, implicit differentiation of the
//! constraint gives `∂ŷᵢ/∂zⱼ = wᵢ(δᵢⱼ − wⱼ/Σw)`.

use super::{Label, LossEval};
use crate::error::{Error, Result};
use crate::numerics::{clamp_probability, softmax};

const MAX_ITERATIONS: usize = 100;
const NORMALIZATION_TOL: f64 = 1e-10;

pub fn exp_t(x: f64, t: f64) -> f64 {
    if t == 1.0 {
        return x.exp();
    }
    let base = 1.0 + (1.0 - t) * x;
    if base <= 0.0 {
        // Left of the support for t < 1, past the pole for t > 1.
        return if t < 1.0 { 0.0 } else { f64::INFINITY };
    }
    base.powf(1.0 / (1.0 - t))
}

pub fn log_t(x: f64, t: f64) -> f64 {
    if t == 1.0 {
        x.ln()
    } else {
        (x.powf(1.0 - t) - 1.0) / (1.0 - t)
    }
}

/// Tempered softmax with temperature `t`; `t = 1` is the ordinary softmax.
pub fn tempered_softmax(z: &[f64], t: f64) -> Result<Vec<f64>> {
    if t == 1.0 {
        return Ok(softmax(z));
    }
    let lambda = normalizer(z, t)?;
    Ok(z.iter().map(|&zi| exp_t(zi - lambda, t)).collect())
}

fn normalizer(z: &[f64], t: f64) -> Result<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = max;
    let mut hi = max - log_t(1.0 / z.len() as f64, t);
    let mut lambda = lo;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let (mut sum, mut slope) = (0.0, 0.0);
        for &zi in z {
            let e = exp_t(zi - lambda, t);
            sum += e;
            slope += e.powf(t);
        }
        residual = sum - 1.0;
        if residual == 0.0 {
            return Ok(lambda);
        }
        if residual > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let mut next = lambda + residual / slope;
        if !(next.is_finite() && next >= lo && next <= hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - lambda).abs() <= 4.0 * f64::EPSILON * lambda.abs().max(1.0) {
            if residual.abs() <= NORMALIZATION_TOL {
                return Ok(next);
            }
            break;
        }
        lambda = next;
    }
    if residual.abs() <= NORMALIZATION_TOL {
        return Ok(lambda);
    }
    Err(Error::Numeric(format!(
        "tempered softmax normalizer (t={t}) did not converge: |Σŷ − 1| = {:.3e}",
        residual.abs()
    )))
}

/// One-hot bi-tempered loss
/// `−log_{t1}(ŷ_k) − (1 − Σᵢ ŷᵢ^{2−t1}) / (2 − t1)` with `ŷ` the tempered
/// softmax at temperature `t2`.
pub fn bitemp_eval(z: &[f64], label: Label, t1: f64, t2: f64) -> Result<LossEval> {
    if !(t1 > 0.0 && t1 < 2.0 && t2 > 0.0) {
        return Err(Error::Config(format!(
            "bitemp requires 0 < t1 < 2 and t2 > 0, got t1={t1} t2={t2}"
        )));
    }
    let k = label.index();
    let y = tempered_softmax(z, t2)?;
    let power_sum: f64 = y.iter().map(|yi| yi.powf(2.0 - t1)).sum();
    let value = -log_t(clamp_probability(y[k]), t1) - (1.0 - power_sum) / (2.0 - t1);

    // gw_i = wᵢ ∂L/∂ŷᵢ = ŷᵢ^{t2+1−t1} − δᵢₖ ŷₖ^{t2−t1}
    let w: Vec<f64> = y.iter().map(|yi| yi.powf(t2)).collect();
    let gw: Vec<f64> = y
        .iter()
        .enumerate()
        .map(|(i, yi)| yi.powf(t2 + 1.0 - t1) - label.indicator(i) * yi.powf(t2 - t1))
        .collect();
    let w_total: f64 = w.iter().sum();
    let gw_total: f64 = gw.iter().sum();
    let delta = gw
        .iter()
        .zip(&w)
        .map(|(g, wi)| g - wi * gw_total / w_total)
        .collect();
    Ok(LossEval { value, delta })
}
