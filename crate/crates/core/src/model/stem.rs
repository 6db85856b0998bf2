//! Frame embedding in and out of the model: space-to-depth patch stem,
//! temporal positional encoding, and the shared reconstruction head.

use crate::error::{Error, Result};
use crate::model::{ModelConfig, Parameters};
use crate::numerics::ops::{
    broadcast_hw, conv2d, depth_to_space, reshape, sigmoid, silu, space_to_depth,
};
use crate::numerics::tape::Tape;
use crate::numerics::tensor::Tensor;

/// [B,L,C0,H0,W0] -> [B,L,C,H,W]: non-overlapping patch decomposition
/// (space-to-depth) followed by two 3x3 conv + SiLU layers, applied
/// identically to every frame.
pub fn patch_stem(
    tape: &Tape,
    frames: &Tensor,
    params: &Parameters,
    config: &ModelConfig,
) -> Result<Tensor> {
    let s = frames.shape().to_vec();
    if s.len() != 5 || s[2] != config.c0 || s[3] != config.h0 || s[4] != config.w0 {
        return Err(Error::shape(format!(
            "patch_stem: frames {s:?} do not match config [{}x{}x{}]",
            config.c0, config.h0, config.w0
        )));
    }
    let (b, l) = (s[0], s[1]);
    let folded = reshape(tape, frames, &[b * l, config.c0, config.h0, config.w0])?;
    let lifted = space_to_depth(tape, &folded, config.patch)?;

    let w1 = params.get("stem.conv1.weight")?;
    let b1 = params.get("stem.conv1.bias")?;
    let h1 = silu(tape, &conv2d(tape, &lifted, w1, Some(b1), 1, 1)?)?;
    let w2 = params.get("stem.conv2.weight")?;
    let b2 = params.get("stem.conv2.bias")?;
    let h2 = silu(tape, &conv2d(tape, &h1, w2, Some(b2), 1, 1)?)?;

    reshape(
        tape,
        &h2,
        &[b, l, config.channels, config.feat_h(), config.feat_w()],
    )
}

/// The full temporal positional encoding [(m+n), C, H, W]: row t of the
/// embedding table broadcast over the spatial grid. Rows 0..m are the
/// input positional encodings, rows m..m+n the timestep queries.
pub fn temporal_encoding(
    tape: &Tape,
    params: &Parameters,
    config: &ModelConfig,
) -> Result<Tensor> {
    let table = params.get("time_embed.weight")?;
    if table.shape() != [config.m + config.n, config.channels] {
        return Err(Error::shape(format!(
            "temporal_encoding: table {:?}, want [{}, {}]",
            table.shape(),
            config.m + config.n,
            config.channels
        )));
    }
    broadcast_hw(tape, table, config.feat_h(), config.feat_w())
}

/// [B,L,C,H,W] -> [B,L,C0,H0,W0]: 3x3 conv to lifted pixel channels,
/// depth-to-space, sigmoid into (0,1). One head is shared by every
/// supervised decoder layer.
pub fn output_head(
    tape: &Tape,
    feat: &Tensor,
    params: &Parameters,
    config: &ModelConfig,
) -> Result<Tensor> {
    let s = feat.shape().to_vec();
    if s.len() != 5 || s[2] != config.channels || s[3] != config.feat_h() || s[4] != config.feat_w()
    {
        return Err(Error::shape(format!(
            "output_head: features {s:?} do not match config"
        )));
    }
    let (b, l) = (s[0], s[1]);
    let folded = reshape(tape, feat, &[b * l, config.channels, s[3], s[4]])?;
    let w = params.get("head.conv.weight")?;
    let bias = params.get("head.conv.bias")?;
    let conv = conv2d(tape, &folded, w, Some(bias), 1, 1)?;
    let spread = depth_to_space(tape, &conv, config.patch)?;
    let squashed = sigmoid(tape, &spread)?;
    reshape(tape, &squashed, &[b, l, config.c0, config.h0, config.w0])
}
