//! Pointwise ops: add (with trailing-shape broadcast), sub, mul,
//! scalar scale, SiLU and sigmoid.

use crate::error::{Error, Result};
use crate::numerics::ops::expect_same_shape;
use crate::numerics::tape::{nary_result, unary_result, Tape};
use crate::numerics::tensor::Tensor;

/// a + b. `b` may have a shape equal to a trailing suffix of `a`'s, in
/// which case it is repeated over the leading axes (batch broadcast).
pub fn add(tape: &Tape, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ashape, bshape) = (a.shape().to_vec(), b.shape().to_vec());
    if ashape.len() < bshape.len() || ashape[ashape.len() - bshape.len()..] != bshape[..] {
        return Err(Error::shape(format!(
            "add: {bshape:?} is not a trailing suffix of {ashape:?}"
        )));
    }
    let bn = b.numel();
    let mut out = a.to_vec();
    {
        let bd = b.data();
        for chunk in out.chunks_exact_mut(bn) {
            for (o, bv) in chunk.iter_mut().zip(bd.iter()) {
                *o += bv;
            }
        }
    }
    nary_result(tape, "add", &[a, b], out, &ashape, move |node, dy| {
        let (a, b) = (&node.inputs[0], &node.inputs[1]);
        if a.requires_grad() {
            a.accumulate_grad(dy);
        }
        if b.requires_grad() {
            let bn = b.numel();
            let mut db = vec![0.0; bn];
            for chunk in dy.chunks_exact(bn) {
                for (d, g) in db.iter_mut().zip(chunk) {
                    *d += g;
                }
            }
            b.accumulate_grad(&db);
        }
    })
}

/// a - b, same shapes.
pub fn sub(tape: &Tape, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    expect_same_shape("sub", a.shape(), b.shape())?;
    let out: Vec<f64> = {
        let (ad, bd) = (a.data(), b.data());
        ad.iter().zip(bd.iter()).map(|(x, y)| x - y).collect()
    };
    let shape = a.shape().to_vec();
    nary_result(tape, "sub", &[a, b], out, &shape, |node, dy| {
        let (a, b) = (&node.inputs[0], &node.inputs[1]);
        if a.requires_grad() {
            a.accumulate_grad(dy);
        }
        if b.requires_grad() {
            let neg: Vec<f64> = dy.iter().map(|g| -g).collect();
            b.accumulate_grad(&neg);
        }
    })
}

/// Elementwise product, same shapes.
pub fn mul(tape: &Tape, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    expect_same_shape("mul", a.shape(), b.shape())?;
    let out: Vec<f64> = {
        let (ad, bd) = (a.data(), b.data());
        ad.iter().zip(bd.iter()).map(|(x, y)| x * y).collect()
    };
    let shape = a.shape().to_vec();
    nary_result(tape, "mul", &[a, b], out, &shape, |node, dy| {
        let (a, b) = (&node.inputs[0], &node.inputs[1]);
        if a.requires_grad() {
            let bd = b.data();
            let da: Vec<f64> = dy.iter().zip(bd.iter()).map(|(g, y)| g * y).collect();
            a.accumulate_grad(&da);
        }
        if b.requires_grad() {
            let ad = a.data();
            let db: Vec<f64> = dy.iter().zip(ad.iter()).map(|(g, x)| g * x).collect();
            b.accumulate_grad(&db);
        }
    })
}

/// c * x for a finite scalar c.
pub fn scale(tape: &Tape, x: &Tensor, c: f64) -> Result<Tensor> {
    if !c.is_finite() {
        return Err(Error::invalid(format!("scale: non-finite factor {c}")));
    }
    let out: Vec<f64> = x.data().iter().map(|v| c * v).collect();
    let shape = x.shape().to_vec();
    unary_result(tape, "scale", x, out, &shape, move |node, dy| {
        let x = &node.inputs[0];
        if x.requires_grad() {
            let dx: Vec<f64> = dy.iter().map(|g| c * g).collect();
            x.accumulate_grad(&dx);
        }
    })
}

#[inline]
fn sigmoid_scalar(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// x * sigmoid(x).
pub fn silu(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let out: Vec<f64> = x.data().iter().map(|&v| v * sigmoid_scalar(v)).collect();
    let shape = x.shape().to_vec();
    unary_result(tape, "silu", x, out, &shape, |node, dy| {
        let x = &node.inputs[0];
        if x.requires_grad() {
            let xd = x.data();
            let dx: Vec<f64> = dy
                .iter()
                .zip(xd.iter())
                .map(|(g, &v)| {
                    let s = sigmoid_scalar(v);
                    g * (s + v * s * (1.0 - s))
                })
                .collect();
            x.accumulate_grad(&dx);
        }
    })
}

pub fn sigmoid(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let out: Vec<f64> = x.data().iter().map(|&v| sigmoid_scalar(v)).collect();
    let shape = x.shape().to_vec();
    unary_result(tape, "sigmoid", x, out, &shape, |node, dy| {
        let x = &node.inputs[0];
        if x.requires_grad() {
            let yd = node.output.data();
            let dx: Vec<f64> = dy
                .iter()
                .zip(yd.iter())
                .map(|(g, &y)| g * y * (1.0 - y))
                .collect();
            x.accumulate_grad(&dx);
        }
    })
}
