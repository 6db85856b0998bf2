//! Layer normalization over a trailing group of axes.

use crate::error::{Error, Result};
use crate::numerics::tape::{nary_result, Tape};
use crate::numerics::tensor::Tensor;

/// Normalize over the last `trailing_axes` axes: each group is shifted
/// to mean 0 and scaled to unit variance (biased estimate, stabilized
/// by `eps`), then transformed by `gain` and `offset`, whose shapes
/// must equal the normalized suffix of `x`'s shape.
pub fn layer_norm(
    tape: &Tape,
    x: &Tensor,
    trailing_axes: usize,
    gain: &Tensor,
    offset: &Tensor,
    eps: f64,
) -> Result<Tensor> {
    let shape = x.shape().to_vec();
    if trailing_axes == 0 || trailing_axes > shape.len() {
        return Err(Error::invalid(format!(
            "layer_norm: invalid trailing axis count {trailing_axes} for shape {shape:?}"
        )));
    }
    let suffix = &shape[shape.len() - trailing_axes..];
    if gain.shape() != suffix || offset.shape() != suffix {
        return Err(Error::shape(format!(
            "layer_norm: gain/offset {:?}/{:?}, want {suffix:?}",
            gain.shape(),
            offset.shape()
        )));
    }
    let n: usize = suffix.iter().product();
    let groups = x.numel() / n;

    let mut out = vec![0.0; x.numel()];
    let mut means = vec![0.0; groups];
    let mut inv_stds = vec![0.0; groups];
    {
        let xd = x.data();
        let gd = gain.data();
        let od = offset.data();
        for g in 0..groups {
            let xs = &xd[g * n..(g + 1) * n];
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let inv_std = 1.0 / (var + eps).sqrt();
            means[g] = mean;
            inv_stds[g] = inv_std;
            let ys = &mut out[g * n..(g + 1) * n];
            for j in 0..n {
                ys[j] = (xs[j] - mean) * inv_std * gd[j] + od[j];
            }
        }
    }

    nary_result(
        tape,
        "layer_norm",
        &[x, gain, offset],
        out,
        &shape,
        move |node, dy| {
            let (x, gain, offset) = (&node.inputs[0], &node.inputs[1], &node.inputs[2]);
            let xd = x.data();
            let gd = gain.data();

            let mut dgain = vec![0.0; n];
            let mut doffset = vec![0.0; n];
            let mut dx = vec![0.0; xd.len()];
            for g in 0..groups {
                let xs = &xd[g * n..(g + 1) * n];
                let dys = &dy[g * n..(g + 1) * n];
                let (mean, inv_std) = (means[g], inv_stds[g]);
                // dxhat = dy * gain; dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
                let mut sum_dxh = 0.0;
                let mut sum_dxh_xh = 0.0;
                for j in 0..n {
                    let xh = (xs[j] - mean) * inv_std;
                    let dxh = dys[j] * gd[j];
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * xh;
                    dgain[j] += dys[j] * xh;
                    doffset[j] += dys[j];
                }
                let m1 = sum_dxh / n as f64;
                let m2 = sum_dxh_xh / n as f64;
                let dxs = &mut dx[g * n..(g + 1) * n];
                for j in 0..n {
                    let xh = (xs[j] - mean) * inv_std;
                    let dxh = dys[j] * gd[j];
                    dxs[j] = inv_std * (dxh - m1 - xh * m2);
                }
            }
            drop(xd);
            drop(gd);
            if x.requires_grad() {
                x.accumulate_grad(&dx);
            }
            if gain.requires_grad() {
                gain.accumulate_grad(&dgain);
            }
            if offset.requires_grad() {
                offset.accumulate_grad(&doffset);
            }
        },
    )
}
