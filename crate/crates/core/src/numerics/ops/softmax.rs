//! Max-subtracted softmax along one axis.

use crate::error::Result;
use crate::numerics::ops::expect_axis;
use crate::numerics::tape::{unary_result, Tape};
use crate::numerics::tensor::Tensor;

/// Softmax along `axis`; each slice sums to 1.
pub fn softmax(tape: &Tape, x: &Tensor, axis: usize) -> Result<Tensor> {
    let shape = x.shape().to_vec();
    expect_axis("softmax", shape.len(), axis)?;
    let lanes = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();

    let mut out = vec![0.0; x.numel()];
    {
        let xd = x.data();
        for o in 0..outer {
            for i in 0..inner {
                let base = o * lanes * inner + i;
                let mut maxv = f64::NEG_INFINITY;
                for l in 0..lanes {
                    maxv = maxv.max(xd[base + l * inner]);
                }
                let mut denom = 0.0;
                for l in 0..lanes {
                    let e = (xd[base + l * inner] - maxv).exp();
                    out[base + l * inner] = e;
                    denom += e;
                }
                for l in 0..lanes {
                    out[base + l * inner] /= denom;
                }
            }
        }
    }

    unary_result(tape, "softmax", x, out, &shape, move |node, dy| {
        let x = &node.inputs[0];
        if !x.requires_grad() {
            return;
        }
        let yd = node.output.data();
        let mut dx = vec![0.0; dy.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * lanes * inner + i;
                let mut dot = 0.0;
                for l in 0..lanes {
                    let idx = base + l * inner;
                    dot += dy[idx] * yd[idx];
                }
                for l in 0..lanes {
                    let idx = base + l * inner;
                    dx[idx] = yd[idx] * (dy[idx] - dot);
                }
            }
        }
        drop(yd);
        x.accumulate_grad(&dx);
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_on_equal_inputs() {
        let tape = Tape::no_grad();
        let x = Tensor::from_vec(vec![0.0, 0.0, 0.0], &[3]).unwrap();
        let y = softmax(&tape, &x, 0).unwrap();
        for v in y.to_vec() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn known_values() {
        let tape = Tape::no_grad();
        let x = Tensor::from_vec(vec![1.0, 2.0, 3.0], &[3]).unwrap();
        let y = softmax(&tape, &x, 0).unwrap();
        let v = y.to_vec();
        let want = [0.09003, 0.24473, 0.66524];
        for (a, b) in v.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn shift_invariance() {
        let tape = Tape::no_grad();
        let x = Tensor::from_vec(vec![0.3, -1.2, 2.4, 0.0], &[4]).unwrap();
        let shifted = Tensor::from_vec(x.to_vec().iter().map(|v| v + 123.5).collect(), &[4]).unwrap();
        let a = softmax(&tape, &x, 0).unwrap().to_vec();
        let b = softmax(&tape, &shifted, 0).unwrap().to_vec();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn middle_axis_slices_sum_to_one() {
        let tape = Tape::no_grad();
        let x = Tensor::from_vec((0..24).map(|v| (v as f64) * 0.37 - 3.0).collect(), &[2, 3, 4]).unwrap();
        let y = softmax(&tape, &x, 1).unwrap();
        let yd = y.to_vec();
        for o in 0..2 {
            for i in 0..4 {
                let s: f64 = (0..3).map(|l| yd[o * 12 + l * 4 + i]).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }
}
