use super::{through_softmax, Label, LossEval};
use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp_minus, softmax};

/// Cross entropy `−ln a_k`, evaluated as `lse(z) − z_k` so that it stays
/// exact (and unbounded) where `a_k` underflows.
pub fn ce_eval(z: &[f64], label: Label) -> LossEval {
    let k = label.index();
    let value = log_sum_exp_minus(z, k);
    let a = softmax(z);
    let mut delta = a.clone();
    delta[k] = -complement(&a, k);
    LossEval { value, delta }
}

/// `1 − a_k` summed from the other entries, exact where `a_k → 1`.
pub(crate) fn complement(a: &[f64], k: usize) -> f64 {
    a.iter()
        .enumerate()
        .filter(|&(n, _)| n != k)
        .map(|(_, an)| an)
        .sum()
}

/// Mean absolute error between softmax output and one-hot label, `2(1 − a_k)`.
pub fn mae_eval(z: &[f64], label: Label) -> LossEval {
    let a = softmax(z);
    let k = label.index();
    let ak = a[k];
    let rest = complement(&a, k);
    let mut delta: Vec<f64> = a.iter().map(|an| 2.0 * ak * an).collect();
    delta[k] = -2.0 * ak * rest;
    LossEval {
        value: 2.0 * rest,
        delta,
    }
}

/// Generalized cross entropy `(1 − a_k^q)/q`.
pub fn gence_eval(z: &[f64], label: Label, q: f64) -> Result<LossEval> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Config(format!(
            "gence requires q in (0, 1], got {q}"
        )));
    }
    let a = softmax(z);
    let akq = a[label.index()].powf(q);
    let delta = a
        .iter()
        .enumerate()
        .map(|(n, an)| akq * (an - label.indicator(n)))
        .collect();
    Ok(LossEval {
        value: (1.0 - akq) / q,
        delta,
    })
}

/// Symmetric cross entropy `α CE + β MAE`.
pub fn symce_eval(z: &[f64], label: Label, alpha: f64, beta: f64) -> LossEval {
    let ce = ce_eval(z, label);
    let mae = mae_eval(z, label);
    LossEval {
        value: alpha * ce.value + beta * mae.value,
        delta: ce
            .delta
            .iter()
            .zip(&mae.delta)
            .map(|(c, m)| alpha * c + beta * m)
            .collect(),
    }
}

/// Bounded cross entropy: cross entropy applied to a second softmax taken
/// over the probabilities `a = softmax(z)`.
///
/// Since every `aᵢ ∈ (0, 1)` the value is below `1 + ln c`.
pub fn boundce_eval(z: &[f64], label: Label) -> LossEval {
    let k = label.index();
    let a = softmax(z);
    let value = log_sum_exp_minus(&a, k);
    let b = softmax(&a);
    let u = a
        .iter()
        .zip(&b)
        .enumerate()
        .map(|(m, (am, bm))| am * (bm - label.indicator(m)))
        .collect();
    LossEval {
        value,
        delta: through_softmax(&a, u),
    }
}
