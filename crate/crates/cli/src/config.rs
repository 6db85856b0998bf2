//! Run configuration: one JSON document covering the model, training
//! hyperparameters, data handling and output location. Every field has
//! a default (an empty document is a valid toy run); unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mimo_seer_core::model::ModelConfig;
use mimo_seer_core::training::TrainHyper;
use mimo_seer_core::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// VSEQ file to train/evaluate on; absent means a deterministic
    /// in-memory sprite world matching the model extents.
    pub path: Option<PathBuf>,
    pub train_frac: f64,
    pub split_seed: u64,
    /// Sequence count for the generated fallback world.
    pub generated_sequences: usize,
    /// Sequence length for the generated fallback world (0 = m + n).
    pub generated_seq_len: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            path: None,
            train_frac: 0.8,
            split_seed: 0,
            generated_sequences: 160,
            generated_seq_len: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainHyper,
    pub data: DataConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Write a checkpoint (and a progress line) every this many steps.
    pub checkpoint_every: usize,
    pub csi_thresholds: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::toy(),
            train: TrainHyper::default(),
            data: DataConfig::default(),
            seed: 0,
            out_dir: PathBuf::from("out"),
            checkpoint_every: 500,
            csi_thresholds: vec![0.3, 0.5],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::format(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::format(format!("config {}: {e}", path.display())))?;
        cfg.model.validate()?;
        Ok(cfg)
    }

    /// Content digest over the canonical serialization; stamped into
    /// every artifact a run writes.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(16);
        for b in &digest[..8] {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }
}

/// Digest an arbitrary serializable flag set (for commands without a
/// run config).
pub fn hash_of(value: &impl Serialize) -> String {
    let canonical = serde_json::to_string(value).expect("flags serialize");
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(16);
    for b in &digest[..8] {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}
