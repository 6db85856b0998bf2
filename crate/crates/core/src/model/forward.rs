//! End-to-end forward pass: all n future frames are produced in one
//! pass, with no prediction ever fed back as input.

use crate::error::{Error, Result};
use crate::model::attention::{AttentionKind, AttentionRecord};
use crate::model::blocks::{decoder_forward, encoder_forward};
use crate::model::stem::{output_head, patch_stem, temporal_encoding};
use crate::model::{ModelConfig, Parameters};
use crate::numerics::ops::{add, broadcast_batch, narrow};
use crate::numerics::tape::Tape;
use crate::numerics::tensor::Tensor;

pub struct ModelOutput {
    /// Last supervised layer's reconstruction, [B,n,C0,H0,W0].
    pub prediction: Tensor,
    /// Head outputs of every supervised decoder layer (all layers under
    /// deep supervision, otherwise just the last).
    pub layer_predictions: Vec<Tensor>,
    pub attention: Vec<AttentionRecord>,
}

/// Full model: stem -> +positional encoding -> encoder -> decoder fed
/// by timestep queries -> shared head.
pub fn model_forward(
    tape: &Tape,
    frames: &Tensor,
    params: &Parameters,
    config: &ModelConfig,
    record_attention: bool,
) -> Result<ModelOutput> {
    config.validate()?;
    let s = frames.shape();
    if s.len() != 5 || s[1] != config.m {
        return Err(Error::shape(format!(
            "model_forward: frames {s:?}, want [B, {}, {}, {}, {}]",
            config.m, config.c0, config.h0, config.w0
        )));
    }
    let batch = s[0];

    let mut records = Vec::new();
    let stem_out = patch_stem(tape, frames, params, config)?;
    let encoding = temporal_encoding(tape, params, config)?;

    let input_encoding = narrow(tape, &encoding, 0, 0, config.m)?;
    let h0 = add(tape, &stem_out, &input_encoding)?;
    let memory = encoder_forward(tape, &h0, params, config, record_attention, &mut records)?;

    let query_rows = narrow(tape, &encoding, 0, config.m, config.n)?;
    let queries = broadcast_batch(tape, &query_rows, batch)?;
    let layer_feats = decoder_forward(
        tape,
        &queries,
        &memory,
        params,
        config,
        record_attention,
        &mut records,
    )?;

    let supervised: Vec<&Tensor> = if config.deep_supervision {
        layer_feats.iter().collect()
    } else {
        vec![layer_feats.last().expect("dec_blocks >= 1")]
    };
    let mut layer_predictions = Vec::with_capacity(supervised.len());
    for feat in supervised {
        layer_predictions.push(output_head(tape, feat, params, config)?);
    }
    let prediction = layer_predictions.last().expect("at least one layer").clone();

    Ok(ModelOutput {
        prediction,
        layer_predictions,
        attention: records,
    })
}

/// Selection for [`extract_attention`].
#[derive(Debug, Clone, Copy, Default)]
pub struct AttentionFilter {
    pub kind: Option<AttentionKind>,
    pub layer: Option<usize>,
}

/// Filter records and append one summed-over-heads aggregate per
/// (kind, layer) group present in the selection.
pub fn extract_attention(
    records: &[AttentionRecord],
    filter: AttentionFilter,
) -> Result<Vec<AttentionRecord>> {
    if records.is_empty() {
        return Err(Error::invalid("extract_attention: empty record set"));
    }
    let mut selected: Vec<AttentionRecord> = records
        .iter()
        .filter(|r| filter.kind.is_none_or(|k| r.kind == k))
        .filter(|r| filter.layer.is_none_or(|l| r.layer == l))
        .cloned()
        .collect();

    let mut groups: Vec<(AttentionKind, usize)> = Vec::new();
    for r in &selected {
        if !groups.contains(&(r.kind, r.layer)) {
            groups.push((r.kind, r.layer));
        }
    }
    let mut aggregates = Vec::new();
    for (kind, layer) in groups {
        let members: Vec<&AttentionRecord> = selected
            .iter()
            .filter(|r| r.kind == kind && r.layer == layer && r.head.is_some())
            .collect();
        if members.is_empty() {
            continue;
        }
        let (rows, cols) = (members[0].rows, members[0].cols);
        let mut map = vec![0.0; rows * cols];
        for m in &members {
            for (acc, v) in map.iter_mut().zip(&m.map) {
                *acc += v;
            }
        }
        aggregates.push(AttentionRecord {
            kind,
            layer,
            head: None,
            rows,
            cols,
            map,
        });
    }
    selected.extend(aggregates);
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::Rng;
    use crate::numerics::tensor::Fill;

    fn tiny_cfg() -> ModelConfig {
        let mut cfg = ModelConfig::toy();
        cfg.m = 2;
        cfg.n = 2;
        cfg.h0 = 8;
        cfg.w0 = 8;
        cfg.patch = 2;
        cfg.channels = 8;
        cfg.heads = 2;
        cfg.enc_blocks = 1;
        cfg.dec_blocks = 1;
        cfg
    }

    fn run(cfg: &ModelConfig, seed: u64, record: bool) -> (Parameters, Tensor, ModelOutput) {
        let mut rng = Rng::new(seed);
        let params = Parameters::init(cfg, &mut rng).unwrap();
        let frames = Tensor::build(
            &[2, cfg.m, cfg.c0, cfg.h0, cfg.w0],
            Fill::Uniform(0.0, 1.0),
            Some(&mut rng),
        )
        .unwrap();
        let tape = Tape::no_grad();
        let out = model_forward(&tape, &frames, &params, cfg, record).unwrap();
        (params, frames, out)
    }

    #[test]
    fn prediction_shape_contract() {
        let cfg = tiny_cfg();
        let (_, _, out) = run(&cfg, 1, false);
        assert_eq!(out.prediction.shape(), &[2, 2, 1, 8, 8]);
        assert_eq!(out.layer_predictions.len(), 1);
    }

    #[test]
    fn forward_is_deterministic() {
        let cfg = tiny_cfg();
        let mut rng = Rng::new(2);
        let params = Parameters::init(&cfg, &mut rng).unwrap();
        let frames =
            Tensor::build(&[1, 2, 1, 8, 8], Fill::Uniform(0.0, 1.0), Some(&mut rng)).unwrap();
        let a = model_forward(&Tape::no_grad(), &frames, &params, &cfg, false).unwrap();
        let b = model_forward(&Tape::no_grad(), &frames, &params, &cfg, false).unwrap();
        let (av, bv) = (a.prediction.to_vec(), b.prediction.to_vec());
        assert!(av.iter().zip(&bv).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn record_counts_match_architecture() {
        let mut cfg = tiny_cfg();
        cfg.enc_blocks = 2;
        cfg.dec_blocks = 2;
        let (_, _, out) = run(&cfg, 3, true);
        let enc = out
            .attention
            .iter()
            .filter(|r| r.kind == AttentionKind::EncoderSelf)
            .count();
        assert_eq!(enc, cfg.enc_blocks * cfg.heads);
        let dec_self = out
            .attention
            .iter()
            .filter(|r| r.kind == AttentionKind::DecoderSelf)
            .count();
        assert_eq!(dec_self, cfg.dec_blocks * cfg.heads);
        let cross = out
            .attention
            .iter()
            .filter(|r| r.kind == AttentionKind::DecoderCross)
            .count();
        assert_eq!(cross, cfg.dec_blocks * cfg.heads);
        // all rows stochastic
        for r in &out.attention {
            for q in 0..r.rows {
                let s: f64 = r.row(q).iter().sum();
                assert!((s - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn op_count_is_independent_of_horizon() {
        // Structural one-pass property: producing more future frames
        // grows tensor extents, never the op sequence.
        let mut a = tiny_cfg();
        a.n = 2;
        let mut b = tiny_cfg();
        b.n = 6;
        let mut rng = Rng::new(4);
        let pa = Parameters::init(&a, &mut rng).unwrap();
        let pb = Parameters::init(&b, &mut Rng::new(4)).unwrap();
        let frames = Tensor::build(&[1, 2, 1, 8, 8], Fill::Uniform(0.0, 1.0), Some(&mut rng)).unwrap();
        let ta = Tape::new();
        model_forward(&ta, &frames, &pa, &a, false).unwrap();
        let tb = Tape::new();
        model_forward(&tb, &frames, &pb, &b, false).unwrap();
        assert_eq!(ta.op_kinds(), tb.op_kinds());
    }

    #[test]
    fn deep_supervision_returns_every_layer() {
        let mut cfg = tiny_cfg();
        cfg.dec_blocks = 3;
        cfg.deep_supervision = true;
        let (_, _, out) = run(&cfg, 5, false);
        assert_eq!(out.layer_predictions.len(), 3);
        cfg.deep_supervision = false;
        let (_, _, out) = run(&cfg, 5, false);
        assert_eq!(out.layer_predictions.len(), 1);
    }

    #[test]
    fn extract_attention_filters_and_aggregates() {
        let (_, _, out) = run(&tiny_cfg(), 6, true);
        let all = extract_attention(&out.attention, AttentionFilter::default()).unwrap();
        // aggregates appended: one per (kind, layer) group
        let aggregates: Vec<_> = all.iter().filter(|r| r.head.is_none()).collect();
        assert_eq!(aggregates.len(), 3); // enc self, dec self, dec cross with 1 block each
        for agg in aggregates {
            let members: Vec<_> = all
                .iter()
                .filter(|r| r.kind == agg.kind && r.layer == agg.layer && r.head.is_some())
                .collect();
            let mut want = vec![0.0; agg.map.len()];
            for m in members {
                for (acc, v) in want.iter_mut().zip(&m.map) {
                    *acc += v;
                }
            }
            for (a, b) in agg.map.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }

        let only_cross = extract_attention(
            &out.attention,
            AttentionFilter {
                kind: Some(AttentionKind::DecoderCross),
                layer: None,
            },
        )
        .unwrap();
        assert!(only_cross
            .iter()
            .all(|r| r.kind == AttentionKind::DecoderCross));

        assert!(extract_attention(&[], AttentionFilter::default()).is_err());
    }
}
