//! Optimization: Adam, the plateau learning-rate schedule and the epoch loop.

mod adam;
mod fit;
mod schedule;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{AugmentConfig, WeightMode};
use crate::{Error, Result};

pub use adam::AdamState;
pub use fit::{evaluate_role, fit, overfit_single_batch, FitObserver, FitOutput};
pub use schedule::LrState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub amsgrad: bool,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_lr: f64,
    /// Smallest validation-loss decrease that counts as an improvement.
    pub min_delta: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Base seed for batch shuffling; augmentation uses `augment.seed`.
    pub seed: u64,
    pub weight_mode: WeightMode,
    /// `None` disables augmentation.
    pub augment: Option<AugmentConfig>,
    /// Parameters whose names start with any of these are not updated.
    pub freeze_prefixes: Vec<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            amsgrad: false,
            plateau_patience: 12,
            plateau_factor: 0.1,
            min_lr: 1e-7,
            min_delta: 1e-6,
            epochs: 50,
            batch_size: 16,
            seed: 0,
            weight_mode: WeightMode::InverseFrequency,
            augment: Some(AugmentConfig::default()),
            freeze_prefixes: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.beta1) || !open_unit(self.beta2) {
            return Err(Error::Config("betas must lie in (0, 1)".into()));
        }
        if !open_unit(self.plateau_factor) {
            return Err(Error::Config("plateau factor must lie in (0, 1)".into()));
        }
        if self.plateau_patience == 0 {
            return Err(Error::Config("plateau patience must be at least 1".into()));
        }
        if !(self.lr0 > 0.0) || !(self.min_lr > 0.0) || self.min_lr > self.lr0 {
            return Err(Error::Config("need 0 < min_lr <= lr0".into()));
        }
        if !(self.epsilon > 0.0) || !(self.min_delta >= 0.0) {
            return Err(Error::Config("epsilon must be positive and min_delta non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        Ok(())
    }

    pub fn is_frozen(&self, name: &str) -> bool {
        self.freeze_prefixes.iter().any(|p| name.starts_with(p.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept as the best checkpoint.
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainReport {
    /// Equality ignoring wall-clock times.
    pub fn same_trajectory(&self, other: &TrainReport) -> bool {
        let strip = |r: &EpochRecord| EpochRecord { wall_time_s: 0.0, ..r.clone() };
        self.best_epoch == other.best_epoch
            && self.best_val_loss.to_bits() == other.best_val_loss.to_bits()
            && self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                let (a, b) = (strip(a), strip(b));
                a.epoch == b.epoch
                    && [a.train_loss, a.train_acc, a.val_loss, a.val_acc, a.lr]
                        .iter()
                        .zip([b.train_loss, b.train_acc, b.val_loss, b.val_acc, b.lr].iter())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}
