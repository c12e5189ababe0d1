//! Classification losses over softmax outputs, each returning the loss value
//! together with its output error `δₙ = ∂L/∂zₙ` with respect to the
//! pre-activations `z`.
//!
//! Every loss takes a one-hot label identified by its class index `k`.
//! [`eval`] is the dispatch entry point: it applies the output bias
//! `z_k → z_k + ε` of a [`LossSpec`] and then calls the kind-specific
//! evaluator. Because the bias is an additive shift of a single coordinate,
//! the output error with respect to the unshifted `z` is the same vector.

mod active_passive;
mod basic;
mod key;
mod tempered;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use active_passive::{actpas1_eval, actpas2_eval};
pub use basic::{boundce_eval, ce_eval, gence_eval, mae_eval, symce_eval};
pub use tempered::{bitemp_eval, exp_t, log_t, tempered_softmax};

/// One-hot label given by its class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Label {
    k: usize,
    classes: usize,
}

impl Label {
    pub fn new(k: usize, classes: usize) -> Result<Self> {
        if k >= classes {
            return Err(Error::Domain(format!(
                "label {k} out of range for {classes} classes"
            )));
        }
        Ok(Label { k, classes })
    }

    pub fn index(&self) -> usize {
        self.k
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub(crate) fn indicator(&self, n: usize) -> f64 {
        if n == self.k {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    /// Output error with respect to each pre-activation.
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Ce,
    Mae,
    GenCe,
    SymCe,
    ActPas1,
    ActPas2,
    BiTemp,
    BoundCe,
}

impl LossKind {
    pub const ALL: [LossKind; 8] = [
        LossKind::Ce,
        LossKind::Mae,
        LossKind::GenCe,
        LossKind::SymCe,
        LossKind::ActPas1,
        LossKind::ActPas2,
        LossKind::BiTemp,
        LossKind::BoundCe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Ce => "ce",
            LossKind::Mae => "mae",
            LossKind::GenCe => "gence",
            LossKind::SymCe => "symce",
            LossKind::ActPas1 => "actpas1",
            LossKind::ActPas2 => "actpas2",
            LossKind::BiTemp => "bitemp",
            LossKind::BoundCe => "boundce",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        LossKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which column of published hyperparameters applies.
///
/// Losses tuned for ten-class benchmarks use the first value, those tuned
/// for hundred-class benchmarks the second. Any class count below 100 is
/// treated as the ten-class regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    TenClass,
    HundredClass,
}

impl Regime {
    pub fn for_classes(classes: usize) -> Self {
        if classes >= 100 {
            Regime::HundredClass
        } else {
            Regime::TenClass
        }
    }
}

/// A loss family plus its hyperparameters.
///
/// Fields that a kind does not use are ignored by its evaluator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Box-Cox exponent of genCE.
    pub q: f64,
    /// Weight of the active (CE / normalized) term.
    pub alpha: f64,
    /// Weight of the passive MAE term.
    pub beta: f64,
    /// Temperature of the tempered logarithm (biTemp).
    pub t1: f64,
    /// Temperature of the tempered exponential (biTemp).
    pub t2: f64,
    /// Output bias added to the labeled pre-activation.
    pub epsilon: f64,
}

impl LossSpec {
    /// `kind` with the published default hyperparameters for `classes`.
    pub fn defaults(kind: LossKind, classes: usize) -> Self {
        let regime = Regime::for_classes(classes);
        let (alpha, beta) = match (kind, regime) {
            (LossKind::SymCe, Regime::TenClass) => (0.1, 2.0),
            (LossKind::SymCe, Regime::HundredClass) => (6.0, 0.2),
            (LossKind::ActPas1 | LossKind::ActPas2, Regime::TenClass) => (1.0, 20.0),
            (LossKind::ActPas1 | LossKind::ActPas2, Regime::HundredClass) => (1.0, 0.2),
            _ => (1.0, 1.0),
        };
        LossSpec {
            kind,
            q: 0.7,
            alpha,
            beta,
            t1: 0.8,
            t2: 1.2,
            epsilon: 0.0,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return bad(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            ));
        }
        match self.kind {
            LossKind::GenCe if !(self.q > 0.0 && self.q <= 1.0) => {
                bad(format!("gence requires q in (0, 1], got {}", self.q))
            }
            LossKind::SymCe | LossKind::ActPas1 | LossKind::ActPas2
                if !(self.alpha >= 0.0 && self.beta >= 0.0)
                    || !(self.alpha.is_finite() && self.beta.is_finite()) =>
            {
                bad(format!(
                    "{} requires finite alpha, beta >= 0, got alpha={} beta={}",
                    self.kind, self.alpha, self.beta
                ))
            }
            LossKind::BiTemp if !(self.t1 > 0.0 && self.t1 < 2.0 && self.t2 > 0.0) => bad(format!(
                "bitemp requires 0 < t1 < 2 and t2 > 0, got t1={} t2={}",
                self.t1, self.t2
            )),
            _ => Ok(()),
        }
    }

    /// Supremum of the loss over all outputs, when it is finite.
    pub fn upper_bound(&self, classes: usize) -> Option<f64> {
        match self.kind {
            LossKind::Ce | LossKind::SymCe => None,
            LossKind::Mae => Some(2.0),
            LossKind::GenCe => Some(1.0 / self.q),
            LossKind::BoundCe => Some(1.0 + (classes as f64).ln()),
            LossKind::ActPas1 | LossKind::ActPas2 => Some(self.alpha + 2.0 * self.beta),
            LossKind::BiTemp if self.t1 < 1.0 => Some(1.0 / (1.0 - self.t1)),
            LossKind::BiTemp => None,
        }
    }

    /// True for MAE* and boundCE*: a bounded loss with an output bias.
    pub fn is_biased(&self) -> bool {
        self.epsilon > 0.0
    }
}

/// Copy of `z` with the labeled pre-activation raised by `epsilon`.
pub fn apply_output_bias(z: &[f64], label: Label, epsilon: f64) -> Vec<f64> {
    let mut out = z.to_vec();
    out[label.index()] += epsilon;
    out
}

/// Applies the output bias of `spec` and evaluates the kind-specific loss.
pub fn eval(spec: &LossSpec, z: &[f64], label: Label) -> Result<LossEval> {
    if z.len() != label.classes() {
        return Err(Error::Shape(format!(
            "pre-activation length {} does not match {} classes",
            z.len(),
            label.classes()
        )));
    }
    let biased;
    let z = if spec.epsilon != 0.0 {
        biased = apply_output_bias(z, label, spec.epsilon);
        &biased[..]
    } else {
        z
    };
    Ok(match spec.kind {
        LossKind::Ce => ce_eval(z, label),
        LossKind::Mae => mae_eval(z, label),
        LossKind::GenCe => gence_eval(z, label, spec.q)?,
        LossKind::SymCe => symce_eval(z, label, spec.alpha, spec.beta),
        LossKind::ActPas1 => actpas1_eval(z, label, spec.alpha, spec.beta),
        LossKind::ActPas2 => actpas2_eval(z, label, spec.alpha, spec.beta),
        LossKind::BiTemp => bitemp_eval(z, label, spec.t1, spec.t2)?,
        LossKind::BoundCe => boundce_eval(z, label),
    })
}

/// Shared backward step through a softmax: given `u_m = a_m ∂L/∂a_m`,
/// returns `δₙ = u_n − a_n Σ_m u_m`.
pub(crate) fn through_softmax(a: &[f64], u: Vec<f64>) -> Vec<f64> {
    let total: f64 = u.iter().sum();
    u.into_iter()
        .zip(a)
        .map(|(un, an)| un - an * total)
        .collect()
}
