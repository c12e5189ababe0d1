//! Active-passive losses: a normalized "active" term plus `β · MAE`.
//!
//! For a per-class score `f(a)` (negative on `(0, 1)`) the normalized term is
//! `N = f(a_k) / Σᵢ f(aᵢ)`. With `φ(a) = a f'(a)` its derivative through the
//! softmax is
//!
//! ```text
//! a_m ∂N/∂a_m = (δ_mk φ(a_k) S − f(a_k) φ(a_m)) / S²,   S = Σᵢ f(aᵢ)
//! ```
//!
//! followed by the usual `δₙ = u_n − a_n Σ u_m` contraction. Probabilities are
//! clamped to `[1e-12, 1 − 1e-12]` before the logarithms; a clamped entry
//! contributes no gradient through `f`.

use super::basic::complement;
use super::{mae_eval, through_softmax, Label, LossEval};
use crate::numerics::{clamp_probability, softmax};

/// `α · log((1−a_k)^½ a_k) / Σᵢ log((1−aᵢ)^½ aᵢ) + β · MAE` (normalized focal).
pub fn actpas1_eval(z: &[f64], label: Label, alpha: f64, beta: f64) -> LossEval {
    active_passive(
        z,
        label,
        alpha,
        beta,
        |a, rest| 0.5 * rest.ln() + a.ln(),
        |a, rest| 1.0 - 0.5 * a / rest,
    )
}

/// `α · log(a_k) / Σᵢ log(aᵢ) + β · MAE` (normalized cross entropy).
pub fn actpas2_eval(z: &[f64], label: Label, alpha: f64, beta: f64) -> LossEval {
    active_passive(z, label, alpha, beta, |a, _| a.ln(), |_, _| 1.0)
}

fn active_passive(
    z: &[f64],
    label: Label,
    alpha: f64,
    beta: f64,
    score: impl Fn(f64, f64) -> f64,
    score_elasticity: impl Fn(f64, f64) -> f64,
) -> LossEval {
    let k = label.index();
    let a = softmax(z);
    let mut f = Vec::with_capacity(a.len());
    let mut phi = Vec::with_capacity(a.len());
    for (i, &ai) in a.iter().enumerate() {
        // `1 − aᵢ` from the other entries where it would cancel.
        let rest = if ai > 0.5 {
            complement(&a, i)
        } else {
            1.0 - ai
        };
        let clamped = clamp_probability(ai);
        if clamped == ai {
            f.push(score(ai, rest));
            phi.push(score_elasticity(ai, rest));
        } else {
            f.push(score(clamped, 1.0 - clamped));
            phi.push(0.0);
        }
    }
    let s: f64 = f.iter().sum();
    let fk = f[k];
    let u = phi
        .iter()
        .enumerate()
        .map(|(m, &pm)| (label.indicator(m) * phi[k] * s - fk * pm) / (s * s))
        .collect();
    let normalized_delta = through_softmax(&a, u);

    let mae = mae_eval(z, label);
    LossEval {
        value: alpha * fk / s + beta * mae.value,
        delta: normalized_delta
            .iter()
            .zip(&mae.delta)
            .map(|(n, m)| alpha * n + beta * m)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_difference, relative_error};
    use crate::numerics::RngStream;

    #[test]
    fn uniform_output_gives_one_over_c() {
        let l = Label::new(4, 10).unwrap();
        assert_close!(actpas1_eval(&[0.0; 10], l, 1.0, 0.0).value, 0.1, 1e-15);
        assert_close!(actpas2_eval(&[0.0; 10], l, 1.0, 0.0).value, 0.1, 1e-15);
    }

    #[test]
    fn pure_passive_is_mae() {
        let mut rng = RngStream::new(2);
        let z: Vec<f64> = (0..10).map(|_| rng.standard_normal()).collect();
        let l = Label::new(1, 10).unwrap();
        let mae = mae_eval(&z, l);
        for e in [actpas1_eval(&z, l, 0.0, 1.0), actpas2_eval(&z, l, 0.0, 1.0)] {
            assert_close!(e.value, mae.value, 1e-15);
            for (x, y) in e.delta.iter().zip(&mae.delta) {
                assert_close!(*x, *y, 1e-15);
            }
        }
    }

    #[test]
    fn normalized_ce_in_unit_interval() {
        let mut rng = RngStream::new(6);
        for _ in 0..500 {
            let z: Vec<f64> = (0..20).map(|_| 3.0 * rng.standard_normal()).collect();
            let v = actpas2_eval(&z, Label::new(0, 20).unwrap(), 1.0, 0.0).value;
            assert!(v > 0.0 && v < 1.0, "{v}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = RngStream::new(10);
        for (c, beta) in [(10, 20.0), (100, 0.2)] {
            for _ in 0..20 {
                let z: Vec<f64> = (0..c).map(|_| 2.0 * rng.standard_normal()).collect();
                let l = Label::new(rng.index(c), c).unwrap();
                for eval in [actpas1_eval, actpas2_eval] {
                    let analytic = eval(&z, l, 1.0, beta).delta;
                    let fd = central_difference(|x| eval(x, l, 1.0, beta).value, &z, 1e-5);
                    assert!(relative_error(&analytic, &fd) < 1e-6);
                }
            }
        }
    }
}
