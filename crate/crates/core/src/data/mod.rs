//! Synthetic moving-sprite video generation, MNIST IDX ingestion, and
//! the VSEQ on-disk sequence container.

pub mod idx;
pub mod sprites;
pub mod vseq;

pub use idx::{read_idx, SpriteBank};
pub use sprites::{generate_sprites, SpriteKind, SpriteWorldConfig};
pub use vseq::{read_vseq, write_vseq};

use crate::error::{Error, Result};
use crate::numerics::rng::Rng;
use crate::numerics::tensor::Tensor;

/// A set of video sequences with 32-bit storage, values in [0,1].
#[derive(Debug, Clone)]
pub struct Dataset {
    pub sequences: usize,
    pub seq_len: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Row-major [sequence][frame][channel][row][col].
    pub data: Vec<f32>,
    pub split: String,
    /// Content digest of the generating configuration, when known.
    pub config_hash: String,
    pub seed: u64,
}

impl Dataset {
    pub fn frame_size(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn sequence_size(&self) -> usize {
        self.seq_len * self.frame_size()
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.sequences * self.sequence_size();
        if self.data.len() != want {
            return Err(Error::format(format!(
                "dataset payload {} does not match header ({} expected)",
                self.data.len(),
                want
            )));
        }
        Ok(())
    }

    /// One sequence as an f64 tensor [L,C,H,W].
    pub fn sequence(&self, index: usize) -> Result<Tensor> {
        if index >= self.sequences {
            return Err(Error::invalid(format!(
                "sequence index {index} out of range ({})",
                self.sequences
            )));
        }
        let ss = self.sequence_size();
        let data: Vec<f64> = self.data[index * ss..(index + 1) * ss]
            .iter()
            .map(|&v| v as f64)
            .collect();
        Tensor::from_vec(
            data,
            &[self.seq_len, self.channels, self.height, self.width],
        )
    }

    /// Batch of conditioning windows and targets: frames [B,m,C,H,W]
    /// and the following [B,n,C,H,W], taken from the start of each
    /// selected sequence.
    pub fn batch(&self, indices: &[usize], m: usize, n: usize) -> Result<(Tensor, Tensor)> {
        if m + n > self.seq_len {
            return Err(Error::invalid(format!(
                "window m+n = {} exceeds sequence length {}",
                m + n,
                self.seq_len
            )));
        }
        let fs = self.frame_size();
        let ss = self.sequence_size();
        let mut inputs = Vec::with_capacity(indices.len() * m * fs);
        let mut targets = Vec::with_capacity(indices.len() * n * fs);
        for &i in indices {
            if i >= self.sequences {
                return Err(Error::invalid(format!("sequence index {i} out of range")));
            }
            let base = i * ss;
            inputs.extend(self.data[base..base + m * fs].iter().map(|&v| v as f64));
            targets.extend(
                self.data[base + m * fs..base + (m + n) * fs]
                    .iter()
                    .map(|&v| v as f64),
            );
        }
        Ok((
            Tensor::from_vec(inputs, &[indices.len(), m, self.channels, self.height, self.width])?,
            Tensor::from_vec(targets, &[indices.len(), n, self.channels, self.height, self.width])?,
        ))
    }

    /// Conditioning windows only: the first m frames of each selected
    /// sequence, [B,m,C,H,W].
    pub fn conditioning(&self, indices: &[usize], m: usize) -> Result<Tensor> {
        if m > self.seq_len {
            return Err(Error::invalid(format!(
                "window m = {m} exceeds sequence length {}",
                self.seq_len
            )));
        }
        let fs = self.frame_size();
        let ss = self.sequence_size();
        let mut out = Vec::with_capacity(indices.len() * m * fs);
        for &i in indices {
            if i >= self.sequences {
                return Err(Error::invalid(format!("sequence index {i} out of range")));
            }
            let base = i * ss;
            out.extend(self.data[base..base + m * fs].iter().map(|&v| v as f64));
        }
        Tensor::from_vec(
            out,
            &[indices.len(), m, self.channels, self.height, self.width],
        )
    }

    /// Ground-truth continuation frames m..m+horizon for a batch.
    pub fn continuation(&self, indices: &[usize], m: usize, horizon: usize) -> Result<Tensor> {
        if m + horizon > self.seq_len {
            return Err(Error::invalid(format!(
                "continuation m+horizon = {} exceeds sequence length {}",
                m + horizon,
                self.seq_len
            )));
        }
        let fs = self.frame_size();
        let ss = self.sequence_size();
        let mut out = Vec::with_capacity(indices.len() * horizon * fs);
        for &i in indices {
            let base = i * ss + m * fs;
            out.extend(
                self.data[base..base + horizon * fs]
                    .iter()
                    .map(|&v| v as f64),
            );
        }
        Tensor::from_vec(
            out,
            &[indices.len(), horizon, self.channels, self.height, self.width],
        )
    }
}

/// Disjoint, exhaustive, seed-deterministic split at sequence
/// granularity. Both sides are guaranteed non-empty.
pub fn split(ds: &Dataset, train_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if ds.sequences < 2 {
        return Err(Error::invalid("split: need at least 2 sequences"));
    }
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::invalid("split: train_frac must be in (0, 1)"));
    }
    let mut rng = Rng::new(seed);
    let perm = rng.permutation(ds.sequences);
    let n_train = ((ds.sequences as f64 * train_frac) as usize)
        .max(1)
        .min(ds.sequences - 1);

    let extract = |idxs: &[usize], tag: &str| -> Dataset {
        let ss = ds.sequence_size();
        let mut data = Vec::with_capacity(idxs.len() * ss);
        for &i in idxs {
            data.extend_from_slice(&ds.data[i * ss..(i + 1) * ss]);
        }
        Dataset {
            sequences: idxs.len(),
            data,
            split: tag.to_string(),
            ..ds.clone()
        }
    };
    let train = extract(&perm[..n_train], "train");
    let eval = extract(&perm[n_train..], "eval");
    Ok((train, eval))
}
