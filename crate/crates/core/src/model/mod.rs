//! The MIMO predictor: patch stem, temporal positional encoding,
//! encoder/decoder of convolutional-attention + 3D-conv feed-forward
//! blocks, timestep-query decoding and the shared output head.

pub mod attention;
pub mod blocks;
pub mod forward;
pub mod params;
pub mod stem;

pub use attention::{mha2d, AttentionKind, AttentionRecord};
pub use forward::{extract_attention, model_forward, AttentionFilter, ModelOutput};
pub use params::Parameters;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How predictions leave the model: all n frames in one pass, or one
/// frame at a time through recursive feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Mimo,
    Miso,
}

/// Attention scale convention: per-head key dimensionality, or the
/// full-channel product regardless of head count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DkMode {
    PerHead,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Conditioning (input) frame count.
    pub m: usize,
    /// Predicted (output) frame count per forward pass.
    pub n: usize,
    pub c0: usize,
    pub h0: usize,
    pub w0: usize,
    /// Patch edge for the space-to-depth stem.
    pub patch: usize,
    /// Model channel count C.
    pub channels: usize,
    pub heads: usize,
    pub enc_blocks: usize,
    pub dec_blocks: usize,
    /// Off: attention sublayers removed, blocks reduce to feed-forward stacks.
    pub use_2dmha: bool,
    /// Off: the 3D-conv feed-forward is replaced by a per-frame 1x1-conv one.
    pub use_lsb: bool,
    /// Off: decoder self-attention removed (queries stay independent).
    pub use_decoder_self_attn: bool,
    pub decode_mode: DecodeMode,
    pub deep_supervision: bool,
    pub dk_mode: DkMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            m: 10,
            n: 10,
            c0: 1,
            h0: 64,
            w0: 64,
            patch: 4,
            channels: 128,
            heads: 8,
            enc_blocks: 6,
            dec_blocks: 10,
            use_2dmha: true,
            use_lsb: true,
            use_decoder_self_attn: true,
            decode_mode: DecodeMode::Mimo,
            deep_supervision: true,
            dk_mode: DkMode::PerHead,
        }
    }
}

impl ModelConfig {
    /// Small configuration for tests and quick experiments.
    pub fn toy() -> Self {
        ModelConfig {
            m: 5,
            n: 5,
            c0: 1,
            h0: 16,
            w0: 16,
            patch: 4,
            channels: 32,
            heads: 4,
            enc_blocks: 2,
            dec_blocks: 2,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.n < 1 {
            return Err(Error::invalid("m and n must be >= 1"));
        }
        if self.patch == 0 || self.h0 % self.patch != 0 || self.w0 % self.patch != 0 {
            return Err(Error::invalid(format!(
                "frame extents {}x{} must divide by patch {}",
                self.h0, self.w0, self.patch
            )));
        }
        if self.heads == 0 || self.channels % self.heads != 0 {
            return Err(Error::invalid(format!(
                "channels {} must divide by heads {}",
                self.channels, self.heads
            )));
        }
        if self.c0 == 0 || self.h0 == 0 || self.w0 == 0 || self.channels == 0 {
            return Err(Error::invalid("extents must be positive"));
        }
        Ok(())
    }

    /// Feature-map height after the patch stem.
    pub fn feat_h(&self) -> usize {
        self.h0 / self.patch
    }

    pub fn feat_w(&self) -> usize {
        self.w0 / self.patch
    }

    /// Channels per attention head.
    pub fn head_channels(&self) -> usize {
        self.channels / self.heads
    }

    /// Scaled-dot-product denominator d_k under the configured convention.
    pub fn dk(&self) -> f64 {
        let spatial = (self.feat_h() * self.feat_w()) as f64;
        match self.dk_mode {
            DkMode::PerHead => self.head_channels() as f64 * spatial,
            DkMode::Full => self.channels as f64 * spatial,
        }
    }
}
