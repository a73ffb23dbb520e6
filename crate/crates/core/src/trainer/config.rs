use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::ContrastiveMode;
use crate::synthworld::AugmentPolicy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: ContrastiveMode,
    pub batch_size: usize,
    pub epochs: u64,
    pub warmup_epochs: u64,
    pub lr: f64,
    pub weight_decay: f64,
    pub temperature: f64,
    pub seed: u64,
    /// Image augmentation for both regimes.
    #[serde(default)]
    pub augment: AugmentPolicy,
    /// CLIP loss averages both directions.
    #[serde(default = "yes")]
    pub symmetric: bool,
}

fn yes() -> bool {
    true
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.mode.validate()?;
        if self.batch_size < 2 {
            return Err(Error::Parameter("batch_size must be >= 2".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Parameter("epochs must be >= 1".into()));
        }
        if self.warmup_epochs >= self.epochs {
            return Err(Error::Parameter(format!(
                "warmup_epochs ({}) must be below epochs ({})",
                self.warmup_epochs, self.epochs
            )));
        }
        if !(self.lr >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Parameter("lr and weight_decay must be >= 0".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Parameter("temperature must be > 0".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Sets the epoch count, shortening warmup if it would no longer fit.
    pub fn with_epochs(mut self, epochs: u64) -> Self {
        self.epochs = epochs;
        self.warmup_epochs = self.warmup_epochs.min(epochs.saturating_sub(1));
        self
    }
}

/// Training defaults of the reference ResNet-50 runs: batch 1024, 200 epochs
/// with 10 warmup epochs; Adam at 1e-2 / wd 1e-6 for SimCLR and 1e-3 / wd 0.1
/// for CLIP. `ClipS(K)` inherits the CLIP row.
pub fn default_config(mode: ContrastiveMode) -> TrainConfig {
    let (lr, weight_decay) = match mode {
        ContrastiveMode::Simclr => (1e-2, 1e-6),
        ContrastiveMode::Clip | ContrastiveMode::ClipS(_) => (1e-3, 0.1),
    };
    TrainConfig {
        mode,
        batch_size: 1024,
        epochs: 200,
        warmup_epochs: 10,
        lr,
        weight_decay,
        temperature: 0.07,
        seed: 0,
        augment: AugmentPolicy::SimclrAnalog,
        symmetric: true,
    }
}

/// Desk-scale preset: the same optimizer rows with batch 64 and a schedule
/// short enough for MLP encoders on a few thousand examples. Learning rates
/// are rescaled for the small batch; weight decay keeps its per-mode ratio.
pub fn desk_config(mode: ContrastiveMode) -> TrainConfig {
    let base = default_config(mode);
    TrainConfig {
        batch_size: 64,
        epochs: 40,
        warmup_epochs: 2,
        lr: 5e-3,
        weight_decay: match mode {
            ContrastiveMode::Simclr => 1e-6,
            _ => 1e-2,
        },
        temperature: 0.2,
        ..base
    }
}

/// Epoch count that keeps the number of optimizer steps roughly constant when
/// a corpus is smaller than `reference_n`.
pub fn scaled_epochs(base_epochs: u64, reference_n: usize, n: usize) -> u64 {
    if n >= reference_n || n == 0 {
        return base_epochs;
    }
    ((base_epochs as f64) * reference_n as f64 / n as f64).round() as u64
}
