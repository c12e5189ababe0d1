//! Noise-robust classification losses and the tooling to study them.
//!
//! - [`losses`]: CE, MAE, genCE, symCE, the two active-passive losses,
//!   bi-tempered loss and bounded cross entropy, each with its analytic
//!   output error, plus the output bias `z_k → z_k + ε`.
//! - [`bias_solver`]: Monte-Carlo root finding for the bias that gives a
//!   freshly initialized network a target mean correct-class activation.
//! - [`analysis`]: learning curves `δ_k(z_k)`, initial pre-activation
//!   histograms and the curve/distribution overlap.
//! - [`data`]: IDX/CSV/synthetic datasets, standardization, symmetric label
//!   noise.
//! - [`trainer`]: a from-scratch MLP with SGD, momentum, weight decay and
//!   learning-rate schedules.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{a} vs {b} (tol {})", $tol);
    }};
}

pub mod analysis;
pub mod bias_solver;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod losses;
pub mod numerics;
pub mod trainer;

pub use error::{Error, Result};
pub use losses::{eval, Label, LossEval, LossKind, LossSpec};
pub use numerics::RngStream;
