//! Output bias `ε` for a target mean correct-class activation.
//!
//! For a freshly initialized network the pre-activations are modelled as
//! i.i.d. `N(0, 1)`. The bias `ε(c)` is the root of
//!
//! ```text
//! ⟨ exp(z_k + ε) / (exp(z_k + ε) + Σ_{i≠k} exp(zᵢ)) ⟩ = ⟨a_k⟩_target
//! ```
//!
//! Each draw only enters through `r = ln Σ_{i≠k} exp(zᵢ) − z_k`, since the
//! biased activation is `σ(ε − r)`. The solver draws the `r` values once and
//! reuses them for every `ε` it tries (common random numbers), which makes the
//! estimate exactly monotone in `ε` and lets plain bisection converge.
//! `k = 0` throughout; the draws are exchangeable.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp_unchecked, mean_and_stderr, RngStream};

pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const DEFAULT_TOLERANCE: f64 = 2e-3;
pub const BRACKET: (f64, f64) = (-10.0, 20.0);
const MIN_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasProblem {
    pub classes: usize,
    pub target_mean_activation: f64,
    pub n_samples: usize,
    pub tolerance: f64,
}

impl BiasProblem {
    pub fn new(classes: usize, target_mean_activation: f64) -> Self {
        BiasProblem {
            classes,
            target_mean_activation,
            n_samples: DEFAULT_SAMPLES,
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Config(format!(
                "bias problem needs at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.n_samples < MIN_SAMPLES {
            return Err(Error::Config(format!(
                "bias problem needs at least {MIN_SAMPLES} samples, got {}",
                self.n_samples
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasSolution {
    pub epsilon: f64,
    /// Monte-Carlo mean correct-class activation at `epsilon`.
    pub mean_activation: f64,
    pub standard_error: f64,
}

/// Log-odds offsets `r = ln Σ_{i≥1} exp(zᵢ) − z₀` for `n` draws of `N(0,1)^c`.
///
/// The biased correct-class activation of a draw is `σ(ε − r)`.
#[derive(Debug, Clone)]
pub struct ActivationSamples {
    offsets: Vec<f64>,
}

impl ActivationSamples {
    pub fn draw(classes: usize, n: usize, rng: &mut RngStream) -> Self {
        let mut others = vec![0.0; classes - 1];
        let offsets = (0..n)
            .map(|_| {
                let z0 = rng.standard_normal();
                for o in others.iter_mut() {
                    *o = rng.standard_normal();
                }
                log_sum_exp_unchecked(&others) - z0
            })
            .collect();
        ActivationSamples { offsets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn activations(&self, epsilon: f64) -> impl Iterator<Item = f64> + '_ {
        self.offsets.iter().map(move |r| sigmoid(epsilon - r))
    }

    pub fn mean_activation(&self, epsilon: f64) -> f64 {
        self.activations(epsilon).sum::<f64>() / self.len() as f64
    }

    pub fn mean_and_stderr(&self, epsilon: f64) -> (f64, f64) {
        let values: Vec<f64> = self.activations(epsilon).collect();
        mean_and_stderr(&values)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Monte-Carlo estimate of the mean biased correct-class activation.
pub fn estimate_mean_correct_activation(
    classes: usize,
    epsilon: f64,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if classes < 2 || n_samples == 0 {
        return Err(Error::Domain(format!(
            "need classes >= 2 and n_samples >= 1, got {classes} and {n_samples}"
        )));
    }
    Ok(ActivationSamples::draw(classes, n_samples, rng).mean_activation(epsilon))
}

pub fn solve_bias(problem: &BiasProblem, rng: &mut RngStream) -> Result<BiasSolution> {
    problem.validate()?;
    let target = problem.target_mean_activation;
    let (mut lo, mut hi) = BRACKET;
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Bracket {
            target,
            low: 0.0,
            high: 1.0,
        });
    }
    let samples = ActivationSamples::draw(problem.classes, problem.n_samples, rng);
    let (f_lo, f_hi) = (samples.mean_activation(lo), samples.mean_activation(hi));
    if !(f_lo <= target && target <= f_hi) {
        return Err(Error::Bracket {
            target,
            low: f_lo,
            high: f_hi,
        });
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if samples.mean_activation(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let epsilon = 0.5 * (lo + hi);
    let (mean_activation, standard_error) = samples.mean_and_stderr(epsilon);
    if standard_error > problem.tolerance {
        return Err(Error::Precision {
            standard_error,
            tolerance: problem.tolerance,
        });
    }
    if (mean_activation - target).abs() > problem.tolerance {
        return Err(Error::Numeric(format!(
            "bisection ended at <a_k> = {mean_activation}, target {target}"
        )));
    }
    Ok(BiasSolution {
        epsilon,
        mean_activation,
        standard_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(classes: usize, target: f64, seed: u64) -> Result<BiasSolution> {
        solve_bias(
            &BiasProblem::new(classes, target),
            &mut RngStream::new(seed),
        )
    }

    #[test]
    fn zero_bias_is_uniform() {
        for c in [2, 10, 100] {
            let samples = ActivationSamples::draw(c, 200_000, &mut RngStream::new(c as u64));
            let (mean, se) = samples.mean_and_stderr(0.0);
            assert!(
                (mean - 1.0 / c as f64).abs() <= 3.0 * se,
                "c={c}: {mean} ± {se}"
            );
        }
    }

    #[test]
    fn estimate_is_monotone_under_common_numbers() {
        for c in [2, 10, 100] {
            let samples = ActivationSamples::draw(c, 20_000, &mut RngStream::new(1));
            let mut prev = samples.mean_activation(-10.0);
            for i in 1..=60 {
                let next = samples.mean_activation(-10.0 + 0.5 * i as f64);
                assert!(next > prev, "c={c}");
                prev = next;
            }
        }
    }

    #[test]
    fn symmetric_target_gives_zero_bias() {
        let s = solve(10, 0.1, 3).unwrap();
        assert!(s.epsilon.abs() < 0.1, "{s:?}");
    }

    #[test]
    fn estimate_matches_direct_softmax() {
        let mut rng = RngStream::new(9);
        let est = estimate_mean_correct_activation(10, 0.5, 200_000, &mut rng).unwrap();
        // numpy oracle at 1e6 samples: 0.14739
        assert!((est - 0.14739).abs() < 0.002, "{est}");

        let mut rng = RngStream::new(10);
        let n = 200_000;
        let direct: f64 = (0..n)
            .map(|_| {
                let mut z = crate::numerics::sample_standard_normal(&mut rng, 10);
                z[0] += 0.5;
                crate::numerics::softmax(&z)[0]
            })
            .sum::<f64>()
            / n as f64;
        assert!((est - direct).abs() < 0.002, "{est} vs {direct}");
    }

    #[test]
    fn rejects_unreachable_targets() {
        assert!(matches!(solve(10, 1.5, 0), Err(Error::Bracket { .. })));
        assert!(matches!(solve(10, 0.0, 0), Err(Error::Bracket { .. })));
        // σ(−10 − r) averages well above 1e-9 for c = 2.
        assert!(matches!(solve(2, 1e-9, 0), Err(Error::Bracket { .. })));
    }

    #[test]
    fn rejects_invalid_problems() {
        let mut p = BiasProblem::new(1, 0.5);
        assert!(matches!(
            solve_bias(&p, &mut RngStream::new(0)),
            Err(Error::Config(_))
        ));
        p.classes = 10;
        p.n_samples = 100;
        assert!(matches!(
            solve_bias(&p, &mut RngStream::new(0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn tiny_tolerance_reports_precision() {
        let mut p = BiasProblem::new(10, 0.15);
        p.n_samples = 10_000;
        p.tolerance = 1e-5;
        assert!(matches!(
            solve_bias(&p, &mut RngStream::new(0)),
            Err(Error::Precision { .. })
        ));
    }

    #[test]
    fn solution_is_self_consistent() {
        let s = solve(100, 0.15, 4).unwrap();
        let fresh =
            estimate_mean_correct_activation(100, s.epsilon, 200_000, &mut RngStream::new(99))
                .unwrap();
        // Independent draws: tolerance plus three standard errors of 2e5 samples.
        assert!((fresh - 0.15).abs() <= DEFAULT_TOLERANCE + 3.0 * 0.25 / 200_000f64.sqrt());
    }
}
