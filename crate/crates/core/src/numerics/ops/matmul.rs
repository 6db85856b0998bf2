//! Batched matrix multiply over the last two axes, plus the matching
//! transpose op.

use crate::error::{Error, Result};
use crate::numerics::ops::gemm::{gemm_acc, transpose};
use crate::numerics::tape::{nary_result, unary_result, Tape};
use crate::numerics::tensor::Tensor;

struct MatmulDims {
    batch: Vec<usize>,
    p: usize,
    q: usize,
    r: usize,
    a_batched: bool,
    b_batched: bool,
}

fn matmul_dims(a: &[usize], b: &[usize]) -> Result<MatmulDims> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::shape(format!("matmul: need >= 2 dims, got {a:?} x {b:?}")));
    }
    let (p, q) = (a[a.len() - 2], a[a.len() - 1]);
    let (q2, r) = (b[b.len() - 2], b[b.len() - 1]);
    if q != q2 {
        return Err(Error::shape(format!("matmul: inner extents {q} vs {q2}")));
    }
    let (alead, blead) = (&a[..a.len() - 2], &b[..b.len() - 2]);
    if alead.len() != blead.len() {
        return Err(Error::shape(format!(
            "matmul: batch ranks differ ({a:?} x {b:?})"
        )));
    }
    let mut batch = Vec::with_capacity(alead.len());
    for (&x, &y) in alead.iter().zip(blead) {
        if x == y || x == 1 || y == 1 {
            batch.push(x.max(y));
        } else {
            return Err(Error::shape(format!("matmul: batch extents {x} vs {y}")));
        }
    }
    let nbatch: usize = batch.iter().product();
    let a_batched = alead.iter().product::<usize>() == nbatch;
    let b_batched = blead.iter().product::<usize>() == nbatch;
    if !a_batched && alead.iter().product::<usize>() != 1 {
        return Err(Error::shape("matmul: partial batch broadcast unsupported"));
    }
    if !b_batched && blead.iter().product::<usize>() != 1 {
        return Err(Error::shape("matmul: partial batch broadcast unsupported"));
    }
    Ok(MatmulDims { batch, p, q, r, a_batched, b_batched })
}

/// a[..,p,q] x b[..,q,r] -> [..,p,r]. Leading batch extents must match
/// or broadcast from 1 (whole-side broadcast).
pub fn matmul(tape: &Tape, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let dims = matmul_dims(a.shape(), b.shape())?;
    let MatmulDims { ref batch, p, q, r, a_batched, b_batched } = dims;
    let nbatch: usize = batch.iter().product();
    let mut out = vec![0.0; nbatch * p * r];
    {
        let ad = a.data();
        let bd = b.data();
        for bi in 0..nbatch {
            let asl = if a_batched { &ad[bi * p * q..(bi + 1) * p * q] } else { &ad[..p * q] };
            let bsl = if b_batched { &bd[bi * q * r..(bi + 1) * q * r] } else { &bd[..q * r] };
            gemm_acc(p, q, r, asl, bsl, &mut out[bi * p * r..(bi + 1) * p * r]);
        }
    }
    let mut out_shape = batch.clone();
    out_shape.push(p);
    out_shape.push(r);

    nary_result(tape, "matmul", &[a, b], out, &out_shape, move |node, dy| {
        let (a, b) = (&node.inputs[0], &node.inputs[1]);
        let (ad, bd) = (a.data(), b.data());
        if a.requires_grad() {
            // dA = dY * B^T
            let mut da = vec![0.0; ad.len()];
            let mut bt = vec![0.0; q * r];
            for bi in 0..nbatch {
                let bsl = if b_batched { &bd[bi * q * r..(bi + 1) * q * r] } else { &bd[..q * r] };
                transpose(q, r, bsl, &mut bt);
                let dsl = &dy[bi * p * r..(bi + 1) * p * r];
                let target = if a_batched { &mut da[bi * p * q..(bi + 1) * p * q] } else { &mut da[..p * q] };
                gemm_acc(p, r, q, dsl, &bt, target);
            }
            a.accumulate_grad(&da);
        }
        if b.requires_grad() {
            // dB = A^T * dY
            let mut db = vec![0.0; bd.len()];
            let mut at = vec![0.0; p * q];
            for bi in 0..nbatch {
                let asl = if a_batched { &ad[bi * p * q..(bi + 1) * p * q] } else { &ad[..p * q] };
                transpose(p, q, asl, &mut at);
                let dsl = &dy[bi * p * r..(bi + 1) * p * r];
                let target = if b_batched { &mut db[bi * q * r..(bi + 1) * q * r] } else { &mut db[..q * r] };
                gemm_acc(q, p, r, &at, dsl, target);
            }
            b.accumulate_grad(&db);
        }
    })
}

/// Swap the last two axes (strided copy).
pub fn transpose_last2(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let shape = x.shape().to_vec();
    if shape.len() < 2 {
        return Err(Error::shape("transpose_last2: need >= 2 dims"));
    }
    let (p, q) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    let nbatch: usize = shape[..shape.len() - 2].iter().product();
    let mut out = vec![0.0; x.numel()];
    {
        let xd = x.data();
        for bi in 0..nbatch {
            transpose(p, q, &xd[bi * p * q..(bi + 1) * p * q], &mut out[bi * p * q..(bi + 1) * p * q]);
        }
    }
    let mut out_shape = shape.clone();
    let n = out_shape.len();
    out_shape.swap(n - 2, n - 1);
    unary_result(tape, "transpose_last2", x, out, &out_shape, move |node, dy| {
        let x = &node.inputs[0];
        if x.requires_grad() {
            let mut dx = vec![0.0; dy.len()];
            for bi in 0..nbatch {
                transpose(q, p, &dy[bi * p * q..(bi + 1) * p * q], &mut dx[bi * p * q..(bi + 1) * p * q]);
            }
            x.accumulate_grad(&dx);
        }
    })
}
