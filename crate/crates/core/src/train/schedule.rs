use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::{Error, Result};

/// Reduce-on-plateau state. After `patience` consecutive epochs without an
/// improvement of at least `min_delta`, the rate is multiplied by `factor`
/// (floored at `min_lr`) and the counter restarts; the best loss is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrState {
    pub current_lr: f64,
    pub best_val_loss: Option<f64>,
    pub epochs_since_improvement: usize,
    pub patience: usize,
    pub factor: f64,
    pub min_lr: f64,
    pub min_delta: f64,
}

impl LrState {
    pub fn new(config: &TrainConfig) -> Self {
        LrState {
            current_lr: config.lr0,
            best_val_loss: None,
            epochs_since_improvement: 0,
            patience: config.plateau_patience,
            factor: config.plateau_factor,
            min_lr: config.min_lr,
            min_delta: config.min_delta,
        }
    }

    /// Feeds one epoch's validation loss and returns the rate for the next epoch.
    pub fn step(&mut self, val_loss: f64) -> Result<f64> {
        if val_loss.is_nan() {
            return Err(Error::invalid("lr_on_plateau", "validation loss is NaN"));
        }
        let improved = match self.best_val_loss {
            None => true,
            Some(best) => best - val_loss >= self.min_delta,
        };
        if improved {
            self.best_val_loss = Some(val_loss);
            self.epochs_since_improvement = 0;
        } else {
            self.epochs_since_improvement += 1;
            if self.epochs_since_improvement >= self.patience {
                self.current_lr = (self.current_lr * self.factor).max(self.min_lr);
                self.epochs_since_improvement = 0;
            }
        }
        Ok(self.current_lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decreasing_losses_keep_rate() {
        let mut s = LrState::new(&TrainConfig::default());
        for e in 0..100 {
            assert_eq!(s.step(10.0 - e as f64 * 0.01).unwrap(), 1e-4);
        }
    }

    #[test]
    fn flat_runs_fire() {
        let mut s = LrState::new(&TrainConfig::default());
        s.step(1.0).unwrap();
        for e in 2..=25 {
            let lr = s.step(1.0).unwrap();
            if e == 13 {
                assert!((lr - 1e-5).abs() < 1e-18);
            }
        }
        assert!((s.current_lr - 1e-6).abs() < 1e-18);
        assert!(s.step(f64::NAN).is_err());
    }

    #[test]
    fn floor_at_min_lr() {
        let mut s = LrState::new(&TrainConfig::default());
        s.step(1.0).unwrap();
        for _ in 0..12 * 10 {
            s.step(2.0).unwrap();
        }
        assert_eq!(s.current_lr, 1e-7);
    }
}
