//! Temporal multi-head attention with 1x1-convolution projections.
//!
//! Each frame's feature map is projected per head, flattened to a
//! vector, and attention runs over the frame axis. No temporal mask is
//! applied anywhere.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, Parameters};
use crate::numerics::ops::{
    add, concat, conv2d, matmul, narrow, reshape, scale, softmax, transpose_last2,
};
use crate::numerics::tape::Tape;
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    EncoderSelf,
    DecoderSelf,
    DecoderCross,
}

impl std::fmt::Display for AttentionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AttentionKind::EncoderSelf => "encoder_self",
            AttentionKind::DecoderSelf => "decoder_self",
            AttentionKind::DecoderCross => "decoder_cross",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for AttentionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "encoder_self" => Ok(AttentionKind::EncoderSelf),
            "decoder_self" => Ok(AttentionKind::DecoderSelf),
            "decoder_cross" => Ok(AttentionKind::DecoderCross),
            other => Err(Error::invalid(format!("unknown attention kind `{other}`"))),
        }
    }
}

/// One temporal attention map. `head` is `None` for the sum over a
/// layer's heads.
#[derive(Debug, Clone)]
pub struct AttentionRecord {
    pub kind: AttentionKind,
    pub layer: usize,
    pub head: Option<usize>,
    /// Queries (rows) by keys (columns), row-major.
    pub rows: usize,
    pub cols: usize,
    pub map: Vec<f64>,
}

impl AttentionRecord {
    pub fn row(&self, q: usize) -> &[f64] {
        &self.map[q * self.cols..(q + 1) * self.cols]
    }
}

pub struct AttnParams<'a> {
    pub q_w: &'a Tensor,
    pub q_b: &'a Tensor,
    pub k_w: &'a Tensor,
    pub k_b: &'a Tensor,
    pub v_w: &'a Tensor,
    pub v_b: &'a Tensor,
    pub o_w: &'a Tensor,
    pub o_b: &'a Tensor,
}

impl Parameters {
    /// Collect the q/k/v/o projection tensors under `prefix`.
    pub fn attn(&self, prefix: &str) -> Result<AttnParams<'_>> {
        Ok(AttnParams {
            q_w: self.get(&format!("{prefix}.q.weight"))?,
            q_b: self.get(&format!("{prefix}.q.bias"))?,
            k_w: self.get(&format!("{prefix}.k.weight"))?,
            k_b: self.get(&format!("{prefix}.k.bias"))?,
            v_w: self.get(&format!("{prefix}.v.weight"))?,
            v_b: self.get(&format!("{prefix}.v.bias"))?,
            o_w: self.get(&format!("{prefix}.o.weight"))?,
            o_b: self.get(&format!("{prefix}.o.bias"))?,
        })
    }
}

/// Apply a 1x1 convolution frame-wise to a [B,L,C,H,W] tensor.
fn project(tape: &Tape, x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let s = x.shape().to_vec();
    let folded = reshape(tape, x, &[s[0] * s[1], s[2], s[3], s[4]])?;
    let y = conv2d(tape, &folded, w, Some(b), 1, 0)?;
    reshape(tape, &y, &s)
}

/// Multi-head temporal attention. Queries come from `q_in` (length Lq),
/// keys/values from `kv_in` (length Lk); both are [B, L, C, H, W].
///
/// Returns the output feature maps and one row-stochastic [B, Lq, Lk]
/// map tensor per head.
pub fn mha2d(
    tape: &Tape,
    q_in: &Tensor,
    kv_in: &Tensor,
    params: &AttnParams<'_>,
    config: &ModelConfig,
) -> Result<(Tensor, Vec<Tensor>)> {
    let qs = q_in.shape().to_vec();
    let ks = kv_in.shape().to_vec();
    if qs.len() != 5 || ks.len() != 5 || qs[0] != ks[0] || qs[2..] != ks[2..] {
        return Err(Error::shape(format!(
            "mha2d: incompatible inputs {qs:?} vs {ks:?}"
        )));
    }
    let (b, lq, c, h, w) = (qs[0], qs[1], qs[2], qs[3], qs[4]);
    let lk = ks[1];
    if c % config.heads != 0 {
        return Err(Error::invalid(format!(
            "mha2d: channels {c} not divisible into {} heads",
            config.heads
        )));
    }
    let ch = c / config.heads;
    let dhw = ch * h * w;

    let q = project(tape, q_in, params.q_w, params.q_b)?;
    let k = project(tape, kv_in, params.k_w, params.k_b)?;
    let v = project(tape, kv_in, params.v_w, params.v_b)?;

    let inv_sqrt_dk = 1.0 / config.dk().sqrt();
    let mut head_outputs = Vec::with_capacity(config.heads);
    let mut head_maps = Vec::with_capacity(config.heads);
    for head in 0..config.heads {
        let q_i = narrow(tape, &q, 2, head * ch, ch)?;
        let k_i = narrow(tape, &k, 2, head * ch, ch)?;
        let v_i = narrow(tape, &v, 2, head * ch, ch)?;
        let q_flat = reshape(tape, &q_i, &[b, lq, dhw])?;
        let k_flat = reshape(tape, &k_i, &[b, lk, dhw])?;
        let v_flat = reshape(tape, &v_i, &[b, lk, dhw])?;

        let k_t = transpose_last2(tape, &k_flat)?;
        let logits = matmul(tape, &q_flat, &k_t)?;
        let scaled = scale(tape, &logits, inv_sqrt_dk)?;
        let attn = softmax(tape, &scaled, 2)?;
        let mixed = matmul(tape, &attn, &v_flat)?;
        head_outputs.push(reshape(tape, &mixed, &[b, lq, ch, h, w])?);
        head_maps.push(attn);
    }

    let refs: Vec<&Tensor> = head_outputs.iter().collect();
    let merged = concat(tape, &refs, 2)?;
    let out = project(tape, &merged, params.o_w, params.o_b)?;
    Ok((out, head_maps))
}

/// Residual + post-norm wrapper shared by all attention sublayers.
pub(crate) fn attention_sublayer(
    tape: &Tape,
    x: &Tensor,
    kv: &Tensor,
    params: &Parameters,
    attn_prefix: &str,
    norm_prefix: &str,
    config: &ModelConfig,
) -> Result<(Tensor, Vec<Tensor>)> {
    let attn_params = params.attn(attn_prefix)?;
    let (a, maps) = mha2d(tape, x, kv, &attn_params, config)?;
    let summed = add(tape, x, &a)?;
    let gain = params.get(&format!("{norm_prefix}.gain"))?;
    let offset = params.get(&format!("{norm_prefix}.offset"))?;
    let out = crate::numerics::ops::layer_norm(tape, &summed, 3, gain, offset, 1e-5)?;
    Ok((out, maps))
}

/// Convert per-head map tensors into records for the first batch item.
pub(crate) fn to_records(
    maps: &[Tensor],
    kind: AttentionKind,
    layer: usize,
    out: &mut Vec<AttentionRecord>,
) {
    for (head, m) in maps.iter().enumerate() {
        let s = m.shape();
        let (lq, lk) = (s[1], s[2]);
        let data = m.data();
        out.push(AttentionRecord {
            kind,
            layer,
            head: Some(head),
            rows: lq,
            cols: lk,
            map: data[..lq * lk].to_vec(),
        });
    }
}
