//! Layout ops: reshape, narrow, concat, axis swap, spatial broadcast,
//! batch broadcast, and the space/depth pixel shuffles.

use crate::error::{Error, Result};
use crate::numerics::tape::{nary_result, unary_result, Tape};
use crate::numerics::tensor::{check_shape, Tensor};

/// Same data, new shape (copy).
pub fn reshape(tape: &Tape, x: &Tensor, new_shape: &[usize]) -> Result<Tensor> {
    let numel = check_shape(new_shape)?;
    if numel != x.numel() {
        return Err(Error::shape(format!(
            "reshape: {:?} ({}) -> {new_shape:?} ({numel})",
            x.shape(),
            x.numel()
        )));
    }
    let out = x.to_vec();
    unary_result(tape, "reshape", x, out, new_shape, |node, dy| {
        let x = &node.inputs[0];
        if x.requires_grad() {
            x.accumulate_grad(dy);
        }
    })
}

/// Slice `len` entries starting at `start` along `axis`.
pub fn narrow(tape: &Tape, x: &Tensor, axis: usize, start: usize, len: usize) -> Result<Tensor> {
    let shape = x.shape().to_vec();
    if axis >= shape.len() {
        return Err(Error::invalid(format!("narrow: axis {axis} out of range")));
    }
    if len == 0 || start + len > shape[axis] {
        return Err(Error::invalid(format!(
            "narrow: range {start}..{} exceeds extent {}",
            start + len,
            shape[axis]
        )));
    }
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let extent = shape[axis];

    let mut out = vec![0.0; outer * len * inner];
    {
        let xd = x.data();
        for o in 0..outer {
            let src = &xd[(o * extent + start) * inner..(o * extent + start + len) * inner];
            out[o * len * inner..(o + 1) * len * inner].copy_from_slice(src);
        }
    }
    let mut out_shape = shape.clone();
    out_shape[axis] = len;

    unary_result(tape, "narrow", x, out, &out_shape, move |node, dy| {
        let x = &node.inputs[0];
        if x.requires_grad() {
            let mut dx = vec![0.0; x.numel()];
            for o in 0..outer {
                dx[(o * extent + start) * inner..(o * extent + start + len) * inner]
                    .copy_from_slice(&dy[o * len * inner..(o + 1) * len * inner]);
            }
            x.accumulate_grad(&dx);
        }
    })
}

/// Concatenate along `axis`; all other extents must match.
pub fn concat(tape: &Tape, parts: &[&Tensor], axis: usize) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::invalid("concat: no inputs"));
    }
    let first = parts[0].shape().to_vec();
    if axis >= first.len() {
        return Err(Error::invalid(format!("concat: axis {axis} out of range")));
    }
    let mut total = 0;
    for p in parts {
        let s = p.shape();
        if s.len() != first.len()
            || s.iter()
                .zip(&first)
                .enumerate()
                .any(|(d, (a, b))| d != axis && a != b)
        {
            return Err(Error::shape(format!(
                "concat: incompatible shapes {:?} vs {first:?}",
                s
            )));
        }
        total += s[axis];
    }
    let inner: usize = first[axis + 1..].iter().product();
    let outer: usize = first[..axis].iter().product();
    let extents: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();

    let mut out_shape = first.clone();
    out_shape[axis] = total;
    let mut out = vec![0.0; outer * total * inner];
    {
        let mut off = 0;
        for (p, &e) in parts.iter().zip(&extents) {
            let pd = p.data();
            for o in 0..outer {
                out[(o * total + off) * inner..(o * total + off + e) * inner]
                    .copy_from_slice(&pd[o * e * inner..(o + 1) * e * inner]);
            }
            off += e;
        }
    }

    nary_result(tape, "concat", parts, out, &out_shape, move |node, dy| {
        let mut off = 0;
        for (p, &e) in node.inputs.iter().zip(&extents) {
            if p.requires_grad() {
                let mut dp = vec![0.0; p.numel()];
                for o in 0..outer {
                    dp[o * e * inner..(o + 1) * e * inner]
                        .copy_from_slice(&dy[(o * total + off) * inner..(o * total + off + e) * inner]);
                }
                p.accumulate_grad(&dp);
            }
            off += e;
        }
    })
}

/// Swap axes 1 and 2 of a tensor with ndim >= 3 (e.g. [B,L,C,...] <->
/// [B,C,L,...]).
pub fn swap_axes12(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let shape = x.shape().to_vec();
    if shape.len() < 3 {
        return Err(Error::shape("swap_axes12: need >= 3 dims"));
    }
    let (b, d1, d2) = (shape[0], shape[1], shape[2]);
    let inner: usize = shape[3..].iter().product();
    let mut out_shape = shape.clone();
    out_shape.swap(1, 2);

    fn apply(b: usize, d1: usize, d2: usize, inner: usize, src: &[f64], dst: &mut [f64]) {
        for bi in 0..b {
            let sbase = bi * d1 * d2 * inner;
            for i in 0..d1 {
                for j in 0..d2 {
                    let s = sbase + (i * d2 + j) * inner;
                    let d = sbase + (j * d1 + i) * inner;
                    dst[d..d + inner].copy_from_slice(&src[s..s + inner]);
                }
            }
        }
    }

    let mut out = vec![0.0; x.numel()];
    apply(b, d1, d2, inner, &x.data(), &mut out);

    unary_result(tape, "swap_axes12", x, out, &out_shape, move |node, dy| {
        let x = &node.inputs[0];
        if x.requires_grad() {
            let mut dx = vec![0.0; dy.len()];
            apply(b, d2, d1, inner, dy, &mut dx);
            x.accumulate_grad(&dx);
        }
    })
}

/// Append [h, w] axes, repeating each element over the spatial grid.
pub fn broadcast_hw(tape: &Tape, x: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    if h == 0 || w == 0 {
        return Err(Error::invalid("broadcast_hw: zero extent"));
    }
    let hw = h * w;
    let mut out = vec![0.0; x.numel() * hw];
    {
        let xd = x.data();
        for (chunk, &v) in out.chunks_exact_mut(hw).zip(xd.iter()) {
            chunk.fill(v);
        }
    }
    let mut out_shape = x.shape().to_vec();
    out_shape.push(h);
    out_shape.push(w);

    unary_result(tape, "broadcast_hw", x, out, &out_shape, move |node, dy| {
        let x = &node.inputs[0];
        if x.requires_grad() {
            let dx: Vec<f64> = dy.chunks_exact(hw).map(|c| c.iter().sum()).collect();
            x.accumulate_grad(&dx);
        }
    })
}

/// Prepend a batch axis of extent `b`, repeating the tensor.
pub fn broadcast_batch(tape: &Tape, x: &Tensor, b: usize) -> Result<Tensor> {
    if b == 0 {
        return Err(Error::invalid("broadcast_batch: zero extent"));
    }
    let n = x.numel();
    let mut out = vec![0.0; b * n];
    {
        let xd = x.data();
        for chunk in out.chunks_exact_mut(n) {
            chunk.copy_from_slice(&xd);
        }
    }
    let mut out_shape = vec![b];
    out_shape.extend_from_slice(x.shape());

    unary_result(tape, "broadcast_batch", x, out, &out_shape, move |node, dy| {
        let x = &node.inputs[0];
        if x.requires_grad() {
            let mut dx = vec![0.0; n];
            for chunk in dy.chunks_exact(n) {
                for (d, g) in dx.iter_mut().zip(chunk) {
                    *d += g;
                }
            }
            x.accumulate_grad(&dx);
        }
    })
}

fn pixel_shuffle(
    n: usize,
    c: usize,
    oh: usize,
    ow: usize,
    p: usize,
    src: &[f64],
    dst: &mut [f64],
    to_depth: bool,
) {
    // depth layout: [n, c*p*p, oh, ow]; space layout: [n, c, oh*p, ow*p]
    let (h, w) = (oh * p, ow * p);
    for ni in 0..n {
        for ci in 0..c {
            for dy in 0..p {
                for dx in 0..p {
                    let cd = (ci * p + dy) * p + dx;
                    for y in 0..oh {
                        for x in 0..ow {
                            let depth_idx = ((ni * c * p * p + cd) * oh + y) * ow + x;
                            let space_idx = ((ni * c + ci) * h + y * p + dy) * w + x * p + dx;
                            if to_depth {
                                dst[depth_idx] = src[space_idx];
                            } else {
                                dst[space_idx] = src[depth_idx];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// [N,C,H,W] -> [N, C*p*p, H/p, W/p]; extents must divide by `p`.
pub fn space_to_depth(tape: &Tape, x: &Tensor, p: usize) -> Result<Tensor> {
    let shape = x.shape().to_vec();
    if shape.len() != 4 {
        return Err(Error::shape("space_to_depth: need [N,C,H,W]"));
    }
    if p == 0 || shape[2] % p != 0 || shape[3] % p != 0 {
        return Err(Error::invalid(format!(
            "space_to_depth: extents {:?} not divisible by patch {p}",
            &shape[2..]
        )));
    }
    let (n, c, oh, ow) = (shape[0], shape[1], shape[2] / p, shape[3] / p);
    let mut out = vec![0.0; x.numel()];
    pixel_shuffle(n, c, oh, ow, p, &x.data(), &mut out, true);
    let out_shape = vec![n, c * p * p, oh, ow];

    unary_result(tape, "space_to_depth", x, out, &out_shape, move |node, dy| {
        let x = &node.inputs[0];
        if x.requires_grad() {
            let mut dx = vec![0.0; dy.len()];
            pixel_shuffle(n, c, oh, ow, p, dy, &mut dx, false);
            x.accumulate_grad(&dx);
        }
    })
}

/// [N, C*p*p, H, W] -> [N, C, H*p, W*p]; inverse of `space_to_depth`.
pub fn depth_to_space(tape: &Tape, x: &Tensor, p: usize) -> Result<Tensor> {
    let shape = x.shape().to_vec();
    if shape.len() != 4 {
        return Err(Error::shape("depth_to_space: need [N,C,H,W]"));
    }
    if p == 0 || shape[1] % (p * p) != 0 {
        return Err(Error::invalid(format!(
            "depth_to_space: channels {} not divisible by {}",
            shape[1],
            p * p
        )));
    }
    let (n, c, oh, ow) = (shape[0], shape[1] / (p * p), shape[2], shape[3]);
    let mut out = vec![0.0; x.numel()];
    pixel_shuffle(n, c, oh, ow, p, &x.data(), &mut out, false);
    let out_shape = vec![n, c, oh * p, ow * p];

    unary_result(tape, "depth_to_space", x, out, &out_shape, move |node, dy| {
        let x = &node.inputs[0];
        if x.requires_grad() {
            let mut dx = vec![0.0; dy.len()];
            pixel_shuffle(n, c, oh, ow, p, dy, &mut dx, true);
            x.accumulate_grad(&dx);
        }
    })
}
