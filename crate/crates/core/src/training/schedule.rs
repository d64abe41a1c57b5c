use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::registry::{no_argument, Registry};

/// `λ1..λ6` in force from `start_epoch` until the next stage begins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub start_epoch: u64,
    pub lambda: [f64; 6],
}

/// Loss weights and learning rates as functions of the epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSchedule {
    pub stages: Vec<Stage>,
    pub lambda_adv: f64,
    pub lr_g: f64,
    pub lr_d: f64,
    /// Both learning rates halve every this many epochs.
    pub halving_period: u64,
}

const EARLY: [f64; 6] = [1.0, 0.5, 0.1, 0.001, 0.001, 0.001];
const MIDDLE: [f64; 6] = [1.0, 0.5, 0.1, 0.5, 0.001, 0.001];
const LATE: [f64; 6] = [1.0, 0.5, 0.1, 0.5, 0.5, 0.2];

impl Default for StageSchedule {
    fn default() -> Self {
        Self::staged()
    }
}

impl StageSchedule {
    /// Inter naturalness is raised at epoch 7, intra naturalness and total
    /// variation at epoch 10.
    pub fn staged() -> Self {
        Self {
            stages: vec![
                Stage { start_epoch: 0, lambda: EARLY },
                Stage { start_epoch: 7, lambda: MIDDLE },
                Stage { start_epoch: 10, lambda: LATE },
            ],
            lambda_adv: 0.1,
            lr_g: 1e-5,
            lr_d: 1.5e-5,
            halving_period: 10,
        }
    }

    /// One stage for the whole run, using the final weights of the staged schedule.
    pub fn fixed() -> Self {
        Self { stages: vec![Stage { start_epoch: 0, lambda: LATE }], ..Self::staged() }
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.stages.first().ok_or_else(|| Error::Config("schedule needs at least one stage".into()))?;
        if first.start_epoch != 0 {
            return Err(Error::Config("the first stage must start at epoch 0".into()));
        }
        if self.stages.windows(2).any(|w| w[1].start_epoch <= w[0].start_epoch) {
            return Err(Error::Config("stage start epochs must be strictly increasing".into()));
        }
        for s in &self.stages {
            LossWeights { lambda: s.lambda, lambda_adv: self.lambda_adv }.validate()?;
        }
        if !(self.lr_g > 0.0 && self.lr_d > 0.0 && self.lr_g.is_finite() && self.lr_d.is_finite()) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.halving_period == 0 {
            return Err(Error::Config("halving_period must be positive".into()));
        }
        Ok(())
    }

    pub fn weights(&self, epoch: u64) -> LossWeights {
        let stage = self.stages.iter().rev().find(|s| s.start_epoch <= epoch).unwrap_or(&self.stages[0]);
        LossWeights { lambda: stage.lambda, lambda_adv: self.lambda_adv }
    }

    /// `(lr_g, lr_d)` halved once per completed period.
    pub fn learning_rates(&self, epoch: u64) -> (f64, f64) {
        let f = 0.5f64.powi((epoch / self.halving_period).min(i32::MAX as u64) as i32);
        (self.lr_g * f, self.lr_d * f)
    }
}

pub fn stage_weights(epoch: u64, sched: &StageSchedule) -> LossWeights {
    sched.weights(epoch)
}

/// Learning rates of the default schedule.
pub fn lr_schedule(epoch: u64) -> (f64, f64) {
    StageSchedule::staged().learning_rates(epoch)
}

/// Registry of built-in schedules: `staged`, `fixed`.
pub fn schedule_registry() -> Registry<StageSchedule> {
    let mut r: Registry<StageSchedule> = Registry::new("schedule");
    r.register("staged", |arg| {
        no_argument("staged", arg)?;
        Ok(Box::new(StageSchedule::staged()))
    })
    .register("fixed", |arg| {
        no_argument("fixed", arg)?;
        Ok(Box::new(StageSchedule::fixed()))
    });
    r
}
