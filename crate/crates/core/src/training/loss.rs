//! Training objective: squared error plus absolute error of the
//! residual, attached to every supervised decoder layer.

use crate::error::{Error, Result};
use crate::numerics::ops::{add, reduce, scale, sub, ReduceKind};
use crate::numerics::tape::Tape;
use crate::numerics::tensor::Tensor;

/// Sum-of-squares + sum-of-abs of (prediction - target), normalized by
/// batch * frames (so the scale is per-frame; `raw_sum` keeps the
/// plain sum). With `deep_supervision`, the mean over all given layer
/// predictions; otherwise only the last one counts.
pub fn loss(
    tape: &Tape,
    layer_predictions: &[Tensor],
    target: &Tensor,
    deep_supervision: bool,
    raw_sum: bool,
) -> Result<Tensor> {
    if layer_predictions.is_empty() {
        return Err(Error::invalid("loss: need at least one prediction"));
    }
    let ts = target.shape().to_vec();
    if ts.len() != 5 {
        return Err(Error::shape(format!("loss: target {ts:?}, want [B,n,C,H,W]")));
    }
    let supervised: &[Tensor] = if deep_supervision {
        layer_predictions
    } else {
        &layer_predictions[layer_predictions.len() - 1..]
    };

    let norm = if raw_sum {
        1.0
    } else {
        1.0 / (ts[0] * ts[1]) as f64
    };
    let mut total: Option<Tensor> = None;
    for pred in supervised {
        if pred.shape() != target.shape() {
            return Err(Error::shape(format!(
                "loss: prediction {:?} vs target {:?}",
                pred.shape(),
                target.shape()
            )));
        }
        let residual = sub(tape, pred, target)?;
        let sq = reduce(tape, &residual, ReduceKind::SumOfSquares, None)?;
        let ab = reduce(tape, &residual, ReduceKind::SumOfAbs, None)?;
        let term = add(tape, &sq, &ab)?;
        total = Some(match total {
            None => term,
            Some(acc) => add(tape, &acc, &term)?,
        });
    }
    let summed = total.expect("nonempty supervised set");
    scale(tape, &summed, norm / supervised.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(data: Vec<f64>, shape: &[usize]) -> Tensor {
        Tensor::from_vec(data, shape).unwrap()
    }

    #[test]
    fn zero_residual_zero_loss() {
        let tape = Tape::no_grad();
        let p = t(vec![0.25; 8], &[1, 2, 1, 2, 2]);
        let y = t(vec![0.25; 8], &[1, 2, 1, 2, 2]);
        let l = loss(&tape, &[p], &y, true, false).unwrap();
        assert_eq!(l.item(), 0.0);
    }

    #[test]
    fn single_pixel_residual_hand_value() {
        // B = n = 1, one pixel off by 0.5: 0.25 + 0.5 = 0.75
        let tape = Tape::no_grad();
        let p = t(vec![0.5], &[1, 1, 1, 1, 1]);
        let y = t(vec![0.0], &[1, 1, 1, 1, 1]);
        let l = loss(&tape, &[p], &y, true, false).unwrap();
        assert!((l.item() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn identical_layers_equal_single_layer() {
        let tape = Tape::no_grad();
        let p = t(vec![0.3, 0.7, 0.1, 0.9], &[1, 1, 1, 2, 2]);
        let y = t(vec![0.5; 4], &[1, 1, 1, 2, 2]);
        let single = loss(&tape, &[p.clone()], &y, true, false).unwrap();
        let triple = loss(&tape, &[p.clone(), p.clone(), p], &y, true, false).unwrap();
        assert!((single.item() - triple.item()).abs() < 1e-15);
    }

    #[test]
    fn supervision_off_uses_last_layer_only() {
        let tape = Tape::no_grad();
        let bad = t(vec![1.0; 4], &[1, 1, 1, 2, 2]);
        let good = t(vec![0.0; 4], &[1, 1, 1, 2, 2]);
        let y = t(vec![0.0; 4], &[1, 1, 1, 2, 2]);
        let l = loss(&tape, &[bad, good], &y, false, false).unwrap();
        assert_eq!(l.item(), 0.0);
    }

    #[test]
    fn raw_sum_scales_by_batch_frames() {
        let tape = Tape::no_grad();
        let p = t(vec![1.0; 16], &[2, 2, 1, 2, 2]);
        let y = t(vec![0.0; 16], &[2, 2, 1, 2, 2]);
        let normalized = loss(&tape, &[p.clone()], &y, true, false).unwrap();
        let raw = loss(&tape, &[p], &y, true, true).unwrap();
        assert!((raw.item() - normalized.item() * 4.0).abs() < 1e-12);
    }

    #[test]
    fn positive_whenever_any_pixel_differs() {
        let tape = Tape::no_grad();
        let p = t(vec![0.5, 0.5, 0.5, 0.5000001], &[1, 1, 1, 2, 2]);
        let y = t(vec![0.5; 4], &[1, 1, 1, 2, 2]);
        let l = loss(&tape, &[p], &y, true, false).unwrap();
        assert!(l.item() > 0.0);
    }
}
