use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// `initial · decay^epoch`
    Exponential,
    /// `initial · decay^(milestones reached)`
    Step,
}

/// Per-epoch learning-rate schedule. `decay` is the multiplicative factor:
/// per epoch for exponential schedules, per milestone for step schedules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub initial_lr: f64,
    pub decay: f64,
    #[serde(default)]
    pub milestones: Vec<usize>,
}

impl Schedule {
    pub fn exponential(initial_lr: f64, decay: f64) -> Self {
        Schedule {
            kind: ScheduleKind::Exponential,
            initial_lr,
            decay,
            milestones: Vec::new(),
        }
    }

    pub fn step(initial_lr: f64, decay: f64, milestones: Vec<usize>) -> Self {
        Schedule {
            kind: ScheduleKind::Step,
            initial_lr,
            decay,
            milestones,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Config(format!(
                "initial learning rate must be positive, got {}",
                self.initial_lr
            )));
        }
        if !(self.decay > 0.0 && self.decay.is_finite()) {
            return Err(Error::Config(format!(
                "decay factor must be positive, got {}",
                self.decay
            )));
        }
        Ok(())
    }

    /// Learning rate during 0-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let exponent = match self.kind {
            ScheduleKind::Exponential => epoch,
            ScheduleKind::Step => self.milestones.iter().filter(|&&m| m <= epoch).count(),
        };
        self.initial_lr * self.decay.powi(exponent as i32)
    }
}

pub fn lr_at(schedule: &Schedule, epoch: usize) -> f64 {
    schedule.lr_at(epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential() {
        let s = Schedule::exponential(0.1, 0.95);
        assert_eq!(lr_at(&s, 0), 0.1);
        assert_close!(lr_at(&s, 2), 0.09025, 1e-15);
    }

    #[test]
    fn step() {
        let s = Schedule::step(0.1, 0.1, vec![100, 150]);
        assert_eq!(lr_at(&s, 99), 0.1);
        assert_close!(lr_at(&s, 100), 0.01, 1e-15);
        assert_close!(lr_at(&s, 150), 0.001, 1e-15);
        assert_close!(lr_at(&s, 199), 0.001, 1e-15);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(Schedule::exponential(0.0, 0.95).validate().is_err());
        assert!(Schedule::exponential(0.1, -1.0).validate().is_err());
    }
}
