//! String keys for losses, e.g. `ce`, `gence:q=0.7`, `mae:eps=0.5`,
//! `symce:alpha=6,beta=0.2`.
//!
//! Parameters not given in the key take the defaults for the class count.

use std::fmt::Write as _;

use super::{LossKind, LossSpec};
use crate::error::{Error, Result};

impl LossSpec {
    pub fn from_key(key: &str, classes: usize) -> Result<Self> {
        let key = key.trim();
        let (name, params) = match key.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (key, None),
        };
        let kind = LossKind::from_name(&name.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown loss '{name}'")))?;
        let mut spec = LossSpec::defaults(kind, classes);
        for pair in params.into_iter().flat_map(|p| p.split(',')) {
            let (param, raw) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed loss parameter '{pair}'")))?;
            let value: f64 = raw.trim().parse().map_err(|_| {
                Error::Config(format!("loss parameter '{param}' is not a number: '{raw}'"))
            })?;
            let slot = match (param.trim(), kind) {
                ("eps" | "epsilon", _) => &mut spec.epsilon,
                ("q", LossKind::GenCe) => &mut spec.q,
                ("alpha", LossKind::SymCe | LossKind::ActPas1 | LossKind::ActPas2) => {
                    &mut spec.alpha
                }
                ("beta", LossKind::SymCe | LossKind::ActPas1 | LossKind::ActPas2) => &mut spec.beta,
                ("t1", LossKind::BiTemp) => &mut spec.t1,
                ("t2", LossKind::BiTemp) => &mut spec.t2,
                (other, _) => {
                    return Err(Error::Config(format!(
                        "loss '{kind}' has no parameter '{other}'"
                    )))
                }
            };
            *slot = value;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Canonical key; parses back to the same spec for any class count.
    pub fn key(&self) -> String {
        let mut params = Vec::new();
        match self.kind {
            LossKind::GenCe => params.push(("q", self.q)),
            LossKind::SymCe | LossKind::ActPas1 | LossKind::ActPas2 => {
                params.push(("alpha", self.alpha));
                params.push(("beta", self.beta));
            }
            LossKind::BiTemp => {
                params.push(("t1", self.t1));
                params.push(("t2", self.t2));
            }
            _ => {}
        }
        if self.epsilon != 0.0 {
            params.push(("eps", self.epsilon));
        }
        let mut out = self.kind.name().to_string();
        for (i, (name, value)) in params.iter().enumerate() {
            out.push(if i == 0 { ':' } else { ',' });
            write!(out, "{name}={value}").unwrap();
        }
        out
    }
}
