use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear warmup followed by cosine decay, measured in optimizer steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub base_lr: f64,
    pub warmup_epochs: u64,
    pub total_epochs: u64,
    pub steps_per_epoch: u64,
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0) {
            return Err(Error::Parameter(format!("base_lr must be > 0, got {}", self.base_lr)));
        }
        if !(self.warmup_epochs > 0 && self.warmup_epochs < self.total_epochs) {
            return Err(Error::Parameter(format!(
                "need 0 < warmup_epochs ({}) < total_epochs ({})",
                self.warmup_epochs, self.total_epochs
            )));
        }
        if self.steps_per_epoch == 0 {
            return Err(Error::Parameter("steps_per_epoch must be > 0".into()));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        self.total_epochs * self.steps_per_epoch
    }

    pub fn warmup_steps(&self) -> u64 {
        self.warmup_epochs * self.steps_per_epoch
    }

    /// The schedule as a function of a continuous step position.
    pub fn lr_at_position(&self, x: f64) -> f64 {
        let w = self.warmup_steps() as f64;
        let last = (self.total_steps() - 1) as f64;
        if x < w {
            return self.base_lr * x / w;
        }
        let span = (last - w).max(1.0);
        let progress = ((x - w) / span).clamp(0.0, 1.0);
        0.5 * self.base_lr * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}

pub fn lr_at(sched: &ScheduleConfig, global_step: u64) -> Result<f64> {
    let total = sched.total_steps();
    if global_step >= total {
        return Err(Error::ScheduleExhausted { step: global_step, total });
    }
    Ok(sched.lr_at_position(global_step as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched() -> ScheduleConfig {
        ScheduleConfig { base_lr: 1e-3, warmup_epochs: 10, total_epochs: 200, steps_per_epoch: 7 }
    }

    #[test]
    fn endpoints_and_midpoint() {
        let s = sched();
        s.validate().unwrap();
        assert_eq!(lr_at(&s, 0).unwrap(), 0.0);
        assert!((lr_at(&s, s.warmup_steps()).unwrap() - 1e-3).abs() < 1e-15);
        assert!(lr_at(&s, s.total_steps() - 1).unwrap().abs() < 1e-12);
        // cosine phase spans steps [70, 1399]; its midpoint is a half step
        let mid = (s.warmup_steps() as f64 + (s.total_steps() - 1) as f64) / 2.0;
        assert!((s.lr_at_position(mid) - 5e-4).abs() < 1e-15);
        let odd = ScheduleConfig { steps_per_epoch: 1, total_epochs: 21, warmup_epochs: 10, ..s };
        assert!((lr_at(&odd, 15).unwrap() - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn continuous_at_warmup_junction() {
        let s = sched();
        let w = s.warmup_steps() as f64;
        let left = s.lr_at_position(w - 1e-9);
        let right = s.lr_at_position(w + 1e-9);
        assert!((left - right).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_and_invalid() {
        let s = sched();
        assert!(matches!(lr_at(&s, s.total_steps()), Err(Error::ScheduleExhausted { .. })));
        assert!(ScheduleConfig { warmup_epochs: 0, ..s }.validate().is_err());
        assert!(ScheduleConfig { warmup_epochs: 200, ..s }.validate().is_err());
        assert!(ScheduleConfig { base_lr: 0.0, ..s }.validate().is_err());
    }

    #[test]
    fn monotone_pieces() {
        let s = sched();
        let lrs: Vec<f64> = (0..s.total_steps()).map(|t| lr_at(&s, t).unwrap()).collect();
        let w = s.warmup_steps() as usize;
        assert!(lrs[..=w].windows(2).all(|p| p[0] <= p[1]));
        assert!(lrs[w..].windows(2).all(|p| p[0] >= p[1]));
    }
}
