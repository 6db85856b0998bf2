//! Reduce-on-plateau learning-rate schedule: halve (by `factor`) when
//! the epoch loss stops improving for `patience` epochs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchedulerState {
    pub best_loss: Option<f64>,
    pub patience_counter: usize,
    pub patience_limit: usize,
    pub factor: f64,
    pub min_lr: f64,
    pub improvement_threshold: f64,
}

impl SchedulerState {
    pub fn new(patience_limit: usize, factor: f64, min_lr: f64, improvement_threshold: f64) -> Self {
        SchedulerState {
            best_loss: None,
            patience_counter: 0,
            patience_limit,
            factor,
            min_lr,
            improvement_threshold,
        }
    }

    /// Feed one epoch loss; returns the learning rate to use next
    /// (never increased, never below `min_lr`).
    pub fn plateau_step(&mut self, epoch_loss: f64, current_lr: f64) -> Result<f64> {
        if !epoch_loss.is_finite() {
            return Err(Error::NumericalAbort(format!(
                "scheduler received non-finite epoch loss {epoch_loss}"
            )));
        }
        let improved = match self.best_loss {
            None => true,
            Some(best) => epoch_loss < best - self.improvement_threshold,
        };
        if improved {
            self.best_loss = Some(epoch_loss);
            self.patience_counter = 0;
            return Ok(current_lr);
        }
        self.patience_counter += 1;
        if self.patience_counter >= self.patience_limit {
            self.patience_counter = 0;
            return Ok((current_lr * self.factor).max(self.min_lr));
        }
        Ok(current_lr)
    }
}
