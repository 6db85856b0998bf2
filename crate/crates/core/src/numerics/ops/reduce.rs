//! Reductions: sum, mean, sum of squares, sum of absolute values.
//! Accumulation is sequential in index order (64-bit), so results are
//! reproducible.

use crate::error::{Error, Result};
use crate::numerics::tape::{unary_result, Tape};
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceKind {
    Sum,
    Mean,
    SumOfSquares,
    SumOfAbs,
}

impl ReduceKind {
    fn accumulate(self, acc: f64, v: f64) -> f64 {
        match self {
            ReduceKind::Sum | ReduceKind::Mean => acc + v,
            ReduceKind::SumOfSquares => acc + v * v,
            ReduceKind::SumOfAbs => acc + v.abs(),
        }
    }
}

/// Reduce over `axes` (deduplicated, ascending), or over everything
/// when `axes` is `None`. Reduced axes are removed from the shape; a
/// full reduction yields shape `[1]`.
pub fn reduce(tape: &Tape, x: &Tensor, kind: ReduceKind, axes: Option<&[usize]>) -> Result<Tensor> {
    let shape = x.shape().to_vec();
    let ndim = shape.len();
    let mut reduce_axis = vec![false; ndim];
    match axes {
        None => reduce_axis.iter_mut().for_each(|a| *a = true),
        Some(list) => {
            for &a in list {
                if a >= ndim {
                    return Err(Error::invalid(format!(
                        "reduce: axis {a} out of range for {ndim} dims"
                    )));
                }
                reduce_axis[a] = true;
            }
        }
    }

    let out_shape: Vec<usize> = shape
        .iter()
        .zip(&reduce_axis)
        .filter(|(_, &r)| !r)
        .map(|(&e, _)| e)
        .collect();
    let out_shape = if out_shape.is_empty() { vec![1] } else { out_shape };
    let out_numel: usize = out_shape.iter().product();

    // Map each input index to its output slot once; the per-element
    // reduction then accumulates in input order.
    let count: usize = shape
        .iter()
        .zip(&reduce_axis)
        .filter(|(_, &r)| r)
        .map(|(&e, _)| e)
        .product();
    let mut out = vec![0.0; out_numel];
    {
        let xd = x.data();
        for_each_map(&shape, &reduce_axis, |i, o| {
            out[o] = kind.accumulate(out[o], xd[i]);
        });
    }
    if kind == ReduceKind::Mean {
        for v in &mut out {
            *v /= count as f64;
        }
    }

    let reduce_axis_b = reduce_axis.clone();
    let shape_b = shape.clone();
    unary_result(tape, "reduce", x, out, &out_shape, move |node, dy| {
        let x = &node.inputs[0];
        if !x.requires_grad() {
            return;
        }
        let xd = x.data();
        let mut dx = vec![0.0; xd.len()];
        for_each_map(&shape_b, &reduce_axis_b, |i, o| {
            let g = dy[o];
            dx[i] = match kind {
                ReduceKind::Sum => g,
                ReduceKind::Mean => g / count as f64,
                ReduceKind::SumOfSquares => 2.0 * xd[i] * g,
                // subgradient at 0 is 0
                ReduceKind::SumOfAbs => {
                    let v = xd[i];
                    if v > 0.0 {
                        g
                    } else if v < 0.0 {
                        -g
                    } else {
                        0.0
                    }
                }
            };
        });
        drop(xd);
        x.accumulate_grad(&dx);
    })
}

/// Visit every flat input index together with its output slot.
fn for_each_map(shape: &[usize], reduce_axis: &[bool], mut f: impl FnMut(usize, usize)) {
    let ndim = shape.len();
    let mut out_stride = vec![0usize; ndim];
    let mut s = 1;
    for d in (0..ndim).rev() {
        if !reduce_axis[d] {
            out_stride[d] = s;
            s *= shape[d];
        }
    }
    let numel: usize = shape.iter().product();
    let mut idx = vec![0usize; ndim];
    let mut o = 0usize;
    for i in 0..numel {
        f(i, o);
        // increment odometer
        for d in (0..ndim).rev() {
            idx[d] += 1;
            o += out_stride[d];
            if idx[d] < shape[d] {
                break;
            }
            o -= out_stride[d] * shape[d];
            idx[d] = 0;
        }
    }
}
