//! Deterministic training loop: seed-derived minibatch order, Adam,
//! plateau scheduling, and checkpointable state.

pub mod adam;
pub mod checkpoint;
pub mod loss;
pub mod scheduler;

pub use adam::{adam_step, clip_global_norm, OptimState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use loss::loss;
pub use scheduler::SchedulerState;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{model_forward, ModelConfig, Parameters};
use crate::numerics::rng::Rng;
use crate::numerics::tape::Tape;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainHyper {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_lr: f64,
    pub improvement_threshold: f64,
    /// Global-norm gradient clip; absent means no clipping.
    pub grad_clip: Option<f64>,
    /// Keep the raw summed loss instead of per-frame normalization.
    pub raw_sum_loss: bool,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            steps: 2000,
            batch_size: 16,
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            plateau_patience: 5,
            plateau_factor: 0.5,
            min_lr: 1e-6,
            improvement_threshold: 1e-6,
            grad_clip: None,
            raw_sum_loss: false,
        }
    }
}

/// One line of the loss history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

/// Resumable training state. The minibatch order is a pure function of
/// (seed, epoch), so a resumed run continues the exact same stream.
pub struct Trainer {
    pub config: ModelConfig,
    pub hyper: TrainHyper,
    pub params: Parameters,
    pub optim: OptimState,
    pub scheduler: SchedulerState,
    pub rng: Rng,
    pub step: usize,
    pub history: Vec<StepRecord>,
    pub seed: u64,
    epoch_losses: Vec<f64>,
}

impl Trainer {
    pub fn new(config: ModelConfig, hyper: TrainHyper, seed: u64) -> Result<Trainer> {
        config.validate()?;
        let mut rng = Rng::new(seed);
        let params = Parameters::init(&config, &mut rng)?;
        let optim = OptimState::new(&params, hyper.lr, hyper.beta1, hyper.beta2, hyper.eps);
        let scheduler = SchedulerState::new(
            hyper.plateau_patience,
            hyper.plateau_factor,
            hyper.min_lr,
            hyper.improvement_threshold,
        );
        Ok(Trainer {
            config,
            hyper,
            params,
            optim,
            scheduler,
            rng,
            step: 0,
            history: Vec::new(),
            seed,
            epoch_losses: Vec::new(),
        })
    }

    /// Steps per epoch for a dataset: one pass over whole batches.
    pub fn steps_per_epoch(&self, data: &Dataset) -> usize {
        (data.sequences / self.hyper.batch_size.min(data.sequences)).max(1)
    }

    /// Run `steps` more training steps. Calls `on_step` after each one.
    pub fn run(
        &mut self,
        data: &Dataset,
        steps: usize,
        mut on_step: impl FnMut(&StepRecord),
    ) -> Result<()> {
        if data.seq_len < self.config.m + self.config.n {
            return Err(Error::invalid(format!(
                "training sequences of length {} are shorter than m+n = {}",
                data.seq_len,
                self.config.m + self.config.n
            )));
        }
        let batch_size = self.hyper.batch_size.min(data.sequences);
        let spe = self.steps_per_epoch(data);

        for _ in 0..steps {
            let epoch = self.step / spe;
            let batch_index = self.step % spe;
            let mut erng = Rng::derive(self.seed, epoch as u64);
            let perm = erng.permutation(data.sequences);
            let indices = &perm[batch_index * batch_size..(batch_index + 1) * batch_size];

            let (x, y) = data.batch(indices, self.config.m, self.config.n)?;
            let tape = Tape::new();
            let forward = model_forward(&tape, &x, &self.params, &self.config, false);
            let loss_t = forward.and_then(|out| {
                loss(
                    &tape,
                    &out.layer_predictions,
                    &y,
                    self.config.deep_supervision,
                    self.hyper.raw_sum_loss,
                )
            });
            let loss_t = match loss_t {
                Ok(t) => t,
                Err(Error::NonFinite(ctx)) => {
                    return Err(Error::NumericalAbort(self.diagnose(&tape, &ctx)))
                }
                Err(e) => return Err(e),
            };
            let loss_v = loss_t.item();
            if !loss_v.is_finite() {
                return Err(Error::NumericalAbort(
                    self.diagnose(&tape, "loss is non-finite"),
                ));
            }
            tape.backward(&loss_t)?;
            if let Some(max_norm) = self.hyper.grad_clip {
                clip_global_norm(&self.params, max_norm)?;
            }
            adam_step(&self.params, &mut self.optim)?;

            self.step += 1;
            let record = StepRecord {
                step: self.step,
                loss: loss_v,
                lr: self.optim.lr,
            };
            self.history.push(record);
            self.epoch_losses.push(loss_v);
            on_step(&record);

            if self.step % spe == 0 {
                let epoch_loss =
                    self.epoch_losses.iter().sum::<f64>() / self.epoch_losses.len() as f64;
                self.epoch_losses.clear();
                self.optim.lr = self.scheduler.plateau_step(epoch_loss, self.optim.lr)?;
            }
        }
        Ok(())
    }

    /// Layer-wise finiteness sweep for the abort diagnostic.
    fn diagnose(&self, tape: &Tape, context: &str) -> String {
        match tape.first_nonfinite_node() {
            Some((index, op)) => format!(
                "{context}; first non-finite value at node {index} (op `{op}`) of {} recorded ops",
                tape.len()
            ),
            None => format!("{context}; all recorded activations finite (gradient overflow?)"),
        }
    }

    pub fn snapshot(&self, config_hash: &str) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            config_hash: config_hash.to_string(),
            hyper: self.hyper.clone(),
            seed: self.seed,
            step: self.step,
            params: self.params.clone(),
            optim: self.optim.clone(),
            scheduler: self.scheduler.clone(),
            rng_state: self.rng.state(),
            history: self.history.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Trainer> {
        ckpt.config.validate()?;
        Ok(Trainer {
            config: ckpt.config,
            hyper: ckpt.hyper,
            params: ckpt.params,
            optim: ckpt.optim,
            scheduler: ckpt.scheduler,
            rng: Rng::from_state(ckpt.rng_state),
            step: ckpt.step,
            history: ckpt.history,
            seed: ckpt.seed,
            epoch_losses: Vec::new(),
        })
    }
}

/// Train a fresh model; convenience wrapper over [`Trainer`].
pub fn train(
    config: &ModelConfig,
    data: &Dataset,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<(Parameters, Vec<StepRecord>)> {
    let mut trainer = Trainer::new(config.clone(), hyper.clone(), seed)?;
    let steps = hyper.steps;
    trainer.run(data, steps, |_| {})?;
    Ok((trainer.params, trainer.history))
}
