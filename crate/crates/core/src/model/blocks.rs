//! Encoder and decoder blocks: attention sublayers plus the
//! feed-forward sublayer (3D-conv local block or per-frame 1x1 FFN),
//! post-norm residual wiring throughout.

use crate::error::Result;
use crate::model::attention::{attention_sublayer, to_records, AttentionKind, AttentionRecord};
use crate::model::{ModelConfig, Parameters};
use crate::numerics::ops::{add, conv2d, conv3d, layer_norm, reshape, silu, swap_axes12};
use crate::numerics::tape::Tape;
use crate::numerics::tensor::Tensor;

const LN_EPS: f64 = 1e-5;

fn ln(
    tape: &Tape,
    x: &Tensor,
    params: &Parameters,
    prefix: &str,
) -> Result<Tensor> {
    let gain = params.get(&format!("{prefix}.gain"))?;
    let offset = params.get(&format!("{prefix}.offset"))?;
    layer_norm(tape, x, 3, gain, offset, LN_EPS)
}

/// Two 3x3x3 convolution + layer-norm + SiLU layers over the
/// (time, height, width) volume, then `layer_norm(x + block(x))`.
pub fn ffn3d(
    tape: &Tape,
    x: &Tensor,
    params: &Parameters,
    prefix: &str,
) -> Result<Tensor> {
    let mut h = x.clone();
    for layer in ["conv1", "conv2"] {
        let w = params.get(&format!("{prefix}.ffn.{layer}.weight"))?;
        let b = params.get(&format!("{prefix}.ffn.{layer}.bias"))?;
        // [B,L,C,H,W] -> [B,C,L,H,W] for the 3D convolution
        let vol = swap_axes12(tape, &h)?;
        let conv = conv3d(tape, &vol, w, Some(b), 1)?;
        let back = swap_axes12(tape, &conv)?;
        let norm_name = if layer == "conv1" { "norm1" } else { "norm2" };
        let normed = ln(tape, &back, params, &format!("{prefix}.ffn.{norm_name}"))?;
        h = silu(tape, &normed)?;
    }
    let summed = add(tape, x, &h)?;
    ln(tape, &summed, params, &format!("{prefix}.ffn_norm"))
}

/// Per-frame two-layer 1x1-conv feed-forward (no temporal mixing), the
/// sublayer used when the local spatio-temporal block is ablated.
fn ffn_per_frame(
    tape: &Tape,
    x: &Tensor,
    params: &Parameters,
    prefix: &str,
) -> Result<Tensor> {
    let s = x.shape().to_vec();
    let folded = reshape(tape, x, &[s[0] * s[1], s[2], s[3], s[4]])?;
    let w1 = params.get(&format!("{prefix}.ffn.conv1.weight"))?;
    let b1 = params.get(&format!("{prefix}.ffn.conv1.bias"))?;
    let h1 = conv2d(tape, &folded, w1, Some(b1), 1, 0)?;
    let a1 = silu(tape, &h1)?;
    let w2 = params.get(&format!("{prefix}.ffn.conv2.weight"))?;
    let b2 = params.get(&format!("{prefix}.ffn.conv2.bias"))?;
    let h2 = conv2d(tape, &a1, w2, Some(b2), 1, 0)?;
    let unfolded = reshape(tape, &h2, &s)?;
    let summed = add(tape, x, &unfolded)?;
    ln(tape, &summed, params, &format!("{prefix}.ffn_norm"))
}

fn ffn_sublayer(
    tape: &Tape,
    x: &Tensor,
    params: &Parameters,
    prefix: &str,
    config: &ModelConfig,
) -> Result<Tensor> {
    if config.use_lsb {
        ffn3d(tape, x, params, prefix)
    } else {
        ffn_per_frame(tape, x, params, prefix)
    }
}

/// Stack of encoder blocks. Returns the memory and, when `record` is
/// set, the per-head attention maps of every block.
pub fn encoder_forward(
    tape: &Tape,
    h0: &Tensor,
    params: &Parameters,
    config: &ModelConfig,
    record: bool,
    records: &mut Vec<AttentionRecord>,
) -> Result<Tensor> {
    let mut x = h0.clone();
    for i in 0..config.enc_blocks {
        if config.use_2dmha {
            let (attended, maps) = attention_sublayer(
                tape,
                &x,
                &x,
                params,
                &format!("enc.{i}.attn"),
                &format!("enc.{i}.attn_norm"),
                config,
            )?;
            if record {
                to_records(&maps, AttentionKind::EncoderSelf, i, records);
            }
            x = attended;
        }
        x = ffn_sublayer(tape, &x, params, &format!("enc.{i}"), config)?;
    }
    Ok(x)
}

/// Stack of decoder blocks over the timestep queries. Returns every
/// block's output (deep supervision reads all of them).
pub fn decoder_forward(
    tape: &Tape,
    queries: &Tensor,
    memory: &Tensor,
    params: &Parameters,
    config: &ModelConfig,
    record: bool,
    records: &mut Vec<AttentionRecord>,
) -> Result<Vec<Tensor>> {
    let mut x = queries.clone();
    let mut layer_outputs = Vec::with_capacity(config.dec_blocks);
    for i in 0..config.dec_blocks {
        if config.use_2dmha {
            if config.use_decoder_self_attn {
                let (attended, maps) = attention_sublayer(
                    tape,
                    &x,
                    &x,
                    params,
                    &format!("dec.{i}.self_attn"),
                    &format!("dec.{i}.self_norm"),
                    config,
                )?;
                if record {
                    to_records(&maps, AttentionKind::DecoderSelf, i, records);
                }
                x = attended;
            }
            let (attended, maps) = attention_sublayer(
                tape,
                &x,
                memory,
                params,
                &format!("dec.{i}.cross_attn"),
                &format!("dec.{i}.cross_norm"),
                config,
            )?;
            if record {
                to_records(&maps, AttentionKind::DecoderCross, i, records);
            }
            x = attended;
        }
        x = ffn_sublayer(tape, &x, params, &format!("dec.{i}"), config)?;
        layer_outputs.push(x.clone());
    }
    Ok(layer_outputs)
}
