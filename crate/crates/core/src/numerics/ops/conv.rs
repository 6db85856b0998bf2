//! 2D/3D cross-correlation (deep-learning convolution convention),
//! lowered to im2col + GEMM. Patch matrices are rebuilt in the backward
//! pass instead of being saved on the tape.

use crate::error::{Error, Result};
use crate::numerics::ops::gemm::{gemm_set, transpose};
use crate::numerics::ops::scratch;
use crate::numerics::parallel;
use crate::numerics::tape::{nary_result, Tape};
use crate::numerics::tensor::Tensor;

#[derive(Clone)]
struct Geom {
    batch: usize,
    cin: usize,
    cout: usize,
    ins: Vec<usize>,  // input spatial extents
    ker: Vec<usize>,  // kernel spatial extents
    outs: Vec<usize>, // output spatial extents
    stride: usize,
    padding: usize,
}

impl Geom {
    fn positions(&self) -> usize {
        self.outs.iter().product()
    }
    fn patch(&self) -> usize {
        self.cin * self.ker.iter().product::<usize>()
    }
    fn in_volume(&self) -> usize {
        self.ins.iter().product()
    }
}

fn conv_geometry(
    op: &str,
    x: &[usize],
    w: &[usize],
    bias: Option<&Tensor>,
    stride: usize,
    padding: usize,
    spatial: usize,
) -> Result<Geom> {
    if x.len() != 2 + spatial || w.len() != 2 + spatial {
        return Err(Error::shape(format!(
            "{op}: expected {}-d input/weight, got {x:?} / {w:?}",
            2 + spatial
        )));
    }
    if stride < 1 {
        return Err(Error::invalid(format!("{op}: stride must be >= 1")));
    }
    let (batch, cin) = (x[0], x[1]);
    let (cout, wcin) = (w[0], w[1]);
    if wcin != cin {
        return Err(Error::shape(format!(
            "{op}: channel mismatch, input has {cin}, weight expects {wcin}"
        )));
    }
    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(Error::shape(format!(
                "{op}: bias shape {:?}, want [{cout}]",
                b.shape()
            )));
        }
    }
    let ins = x[2..].to_vec();
    let ker = w[2..].to_vec();
    let mut outs = Vec::with_capacity(spatial);
    for d in 0..spatial {
        let padded = ins[d] + 2 * padding;
        if ker[d] > padded {
            return Err(Error::invalid(format!(
                "{op}: kernel extent {} exceeds padded input {padded}",
                ker[d]
            )));
        }
        let span = padded - ker[d];
        if span % stride != 0 {
            return Err(Error::invalid(format!(
                "{op}: non-integer output extent along axis {d}"
            )));
        }
        outs.push(span / stride + 1);
    }
    Ok(Geom { batch, cin, cout, ins, ker, outs, stride, padding })
}

/// cols[b * positions + opos, ci * kvol + kpos] = padded x value.
fn im2col(g: &Geom, x: &[f64], cols: &mut [f64]) {
    let patch = g.patch();
    match g.ins.len() {
        2 => parallel::for_row_chunks(cols, patch, |row0, chunk| {
            let (h, w) = (g.ins[0], g.ins[1]);
            let (kh, kw) = (g.ker[0], g.ker[1]);
            let (oh, ow) = (g.outs[0], g.outs[1]);
            for (r, row) in chunk.chunks_exact_mut(patch).enumerate() {
                let idx = row0 + r;
                let b = idx / (oh * ow);
                let oy = (idx / ow) % oh;
                let ox = idx % ow;
                let mut col = 0;
                for ci in 0..g.cin {
                    let plane = &x[(b * g.cin + ci) * h * w..];
                    for ky in 0..kh {
                        let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                        for kx in 0..kw {
                            let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                            row[col] = if iy >= 0 && (iy as usize) < h && ix >= 0 && (ix as usize) < w {
                                plane[iy as usize * w + ix as usize]
                            } else {
                                0.0
                            };
                            col += 1;
                        }
                    }
                }
            }
        }),
        3 => parallel::for_row_chunks(cols, patch, |row0, chunk| {
            let (d, h, w) = (g.ins[0], g.ins[1], g.ins[2]);
            let (kd, kh, kw) = (g.ker[0], g.ker[1], g.ker[2]);
            let (od, oh, ow) = (g.outs[0], g.outs[1], g.outs[2]);
            for (r, row) in chunk.chunks_exact_mut(patch).enumerate() {
                let idx = row0 + r;
                let b = idx / (od * oh * ow);
                let oz = (idx / (oh * ow)) % od;
                let oy = (idx / ow) % oh;
                let ox = idx % ow;
                let mut col = 0;
                for ci in 0..g.cin {
                    let volume = &x[(b * g.cin + ci) * d * h * w..];
                    for kz in 0..kd {
                        let iz = (oz * g.stride + kz) as isize - g.padding as isize;
                        let z_ok = iz >= 0 && (iz as usize) < d;
                        for ky in 0..kh {
                            let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                            let zy_ok = z_ok && iy >= 0 && (iy as usize) < h;
                            for kx in 0..kw {
                                let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                                row[col] = if zy_ok && ix >= 0 && (ix as usize) < w {
                                    volume[(iz as usize * h + iy as usize) * w + ix as usize]
                                } else {
                                    0.0
                                };
                                col += 1;
                            }
                        }
                    }
                }
            }
        }),
        _ => unreachable!("conv supports 2 or 3 spatial dims"),
    }
}

/// Scatter-add of dcols back onto dx (inverse of im2col). Parallel over
/// samples; within a sample, rows are applied in fixed order.
fn col2im_acc(g: &Geom, dcols: &[f64], dx: &mut [f64]) {
    let patch = g.patch();
    let positions = g.positions();
    let sample = g.cin * g.in_volume();
    parallel::for_row_chunks(dx, sample, |b0, dx_chunk| {
        for (bi, dxs) in dx_chunk.chunks_exact_mut(sample).enumerate() {
            let b = b0 + bi;
            for opos in 0..positions {
                let row = &dcols[(b * positions + opos) * patch..(b * positions + opos + 1) * patch];
                scatter_row(g, opos, row, dxs);
            }
        }
    });
}

fn scatter_row(g: &Geom, opos: usize, row: &[f64], dxs: &mut [f64]) {
    match g.ins.len() {
        2 => {
            let (h, w) = (g.ins[0], g.ins[1]);
            let (kh, kw) = (g.ker[0], g.ker[1]);
            let ow = g.outs[1];
            let oy = opos / ow;
            let ox = opos % ow;
            let mut col = 0;
            for ci in 0..g.cin {
                let base = ci * h * w;
                for ky in 0..kh {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    for kx in 0..kw {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        if iy >= 0 && (iy as usize) < h && ix >= 0 && (ix as usize) < w {
                            dxs[base + iy as usize * w + ix as usize] += row[col];
                        }
                        col += 1;
                    }
                }
            }
        }
        3 => {
            let (d, h, w) = (g.ins[0], g.ins[1], g.ins[2]);
            let (kd, kh, kw) = (g.ker[0], g.ker[1], g.ker[2]);
            let (oh, ow) = (g.outs[1], g.outs[2]);
            let oz = opos / (oh * ow);
            let oy = (opos / ow) % oh;
            let ox = opos % ow;
            let mut col = 0;
            for ci in 0..g.cin {
                let base = ci * d * h * w;
                for kz in 0..kd {
                    let iz = (oz * g.stride + kz) as isize - g.padding as isize;
                    let z_ok = iz >= 0 && (iz as usize) < d;
                    for ky in 0..kh {
                        let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                        let zy_ok = z_ok && iy >= 0 && (iy as usize) < h;
                        for kx in 0..kw {
                            let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                            if zy_ok && ix >= 0 && (ix as usize) < w {
                                dxs[base + (iz as usize * h + iy as usize) * w + ix as usize] += row[col];
                            }
                            col += 1;
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
}

fn conv_forward(g: &Geom, x: &[f64], w: &[f64], bias: Option<&[f64]>) -> Vec<f64> {
    let patch = g.patch();
    let positions = g.positions();
    let rows = g.batch * positions;

    let mut cols = scratch::take(rows * patch);
    im2col(g, x, &mut cols);

    let mut wt = scratch::take(patch * g.cout);
    transpose(g.cout, patch, w, &mut wt);

    let mut out_mat = scratch::take(rows * g.cout);
    gemm_set(rows, patch, g.cout, &cols, &wt, &mut out_mat);
    scratch::give(cols);
    scratch::give(wt);

    // [b, pos, co] -> [b, co, pos], plus bias
    let mut out = vec![0.0; g.batch * g.cout * positions];
    parallel::for_row_chunks(&mut out, g.cout * positions, |b0, chunk| {
        for (bi, sample) in chunk.chunks_exact_mut(g.cout * positions).enumerate() {
            let b = b0 + bi;
            transpose(positions, g.cout, &out_mat[b * positions * g.cout..(b + 1) * positions * g.cout], sample);
            if let Some(bias) = bias {
                for (co, plane) in sample.chunks_exact_mut(positions).enumerate() {
                    let bv = bias[co];
                    for v in plane.iter_mut() {
                        *v += bv;
                    }
                }
            }
        }
    });
    scratch::give(out_mat);
    out
}

fn conv_backward(g: &Geom, node_inputs: &[Tensor], dy: &[f64]) {
    let x = &node_inputs[0];
    let w = &node_inputs[1];
    let bias = node_inputs.get(2);
    let patch = g.patch();
    let positions = g.positions();
    let rows = g.batch * positions;

    // [b, co, pos] -> [b, pos, co]
    let mut dy_mat = scratch::take(rows * g.cout);
    {
        for b in 0..g.batch {
            transpose(
                g.cout,
                positions,
                &dy[b * g.cout * positions..(b + 1) * g.cout * positions],
                &mut dy_mat[b * positions * g.cout..(b + 1) * positions * g.cout],
            );
        }
    }

    if let Some(bias) = bias {
        if bias.requires_grad() {
            let mut db = vec![0.0; g.cout];
            for b in 0..g.batch {
                for co in 0..g.cout {
                    let plane = &dy[(b * g.cout + co) * positions..(b * g.cout + co + 1) * positions];
                    db[co] += plane.iter().sum::<f64>();
                }
            }
            bias.accumulate_grad(&db);
        }
    }

    if w.requires_grad() {
        let xd = x.data();
        let mut cols = scratch::take(rows * patch);
        im2col(g, &xd, &mut cols);
        let mut dyt = scratch::take(g.cout * rows);
        transpose(rows, g.cout, &dy_mat, &mut dyt);
        let mut dw = scratch::take(g.cout * patch);
        gemm_set(g.cout, rows, patch, &dyt, &cols, &mut dw);
        drop(xd);
        w.accumulate_grad(&dw);
        scratch::give(cols);
        scratch::give(dyt);
        scratch::give(dw);
    }

    if x.requires_grad() {
        let wd = w.data();
        let mut dcols = scratch::take(rows * patch);
        gemm_set(rows, g.cout, patch, &dy_mat, &wd, &mut dcols);
        drop(wd);
        let mut dx = scratch::take_zeroed(x.numel());
        col2im_acc(g, &dcols, &mut dx);
        x.accumulate_grad(&dx);
        scratch::give(dcols);
        scratch::give(dx);
    }
    scratch::give(dy_mat);
}

fn conv_impl(
    tape: &Tape,
    op: &'static str,
    x: &Tensor,
    w: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    padding: usize,
    spatial: usize,
) -> Result<Tensor> {
    let g = conv_geometry(op, x.shape(), w.shape(), bias, stride, padding, spatial)?;
    let out = {
        let xd = x.data();
        let wd = w.data();
        let bd = bias.map(|b| b.data());
        conv_forward(&g, &xd, &wd, bd.as_ref().map(|r| r.as_slice()))
    };
    let mut out_shape = vec![g.batch, g.cout];
    out_shape.extend_from_slice(&g.outs);

    let mut inputs: Vec<&Tensor> = vec![x, w];
    if let Some(b) = bias {
        inputs.push(b);
    }
    nary_result(tape, op, &inputs, out, &out_shape, move |node, dy| {
        conv_backward(&g, &node.inputs, dy);
    })
}

/// 2D convolution: x[B,Cin,H,W] * w[Cout,Cin,kh,kw] -> [B,Cout,H',W'].
pub fn conv2d(
    tape: &Tape,
    x: &Tensor,
    w: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    conv_impl(tape, "conv2d", x, w, bias, stride, padding, 2)
}

/// 3D convolution, stride fixed at 1:
/// x[B,Cin,D,H,W] * w[Cout,Cin,kd,kh,kw] -> [B,Cout,D',H',W'].
pub fn conv3d(
    tape: &Tape,
    x: &Tensor,
    w: &Tensor,
    bias: Option<&Tensor>,
    padding: usize,
) -> Result<Tensor> {
    conv_impl(tape, "conv3d", x, w, bias, 1, padding, 3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_1x1_kernel() {
        let tape = Tape::no_grad();
        let x = Tensor::from_vec((0..2 * 3 * 4 * 4).map(|v| v as f64 * 0.5).collect(), &[2, 3, 4, 4]).unwrap();
        // w[co][ci] = 1 if co == ci
        let mut w = vec![0.0; 9];
        for c in 0..3 {
            w[c * 3 + c] = 1.0;
        }
        let w = Tensor::from_vec(w, &[3, 3, 1, 1]).unwrap();
        let y = conv2d(&tape, &x, &w, None, 1, 0).unwrap();
        assert_eq!(y.shape(), x.shape());
        let (xv, yv) = (x.to_vec(), y.to_vec());
        assert!(xv.iter().zip(&yv).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn ones_kernel_counts_window() {
        let tape = Tape::no_grad();
        let x = Tensor::from_vec(vec![1.0; 16], &[1, 1, 4, 4]).unwrap();
        let w = Tensor::from_vec(vec![1.0; 9], &[1, 1, 3, 3]).unwrap();
        let y = conv2d(&tape, &x, &w, None, 1, 1).unwrap();
        let v = y.to_vec();
        assert_eq!(v[0], 4.0); // corner
        assert_eq!(v[5], 9.0); // interior
        assert_eq!(v[15], 4.0);
    }

    #[test]
    fn conv3d_identity_and_window() {
        let tape = Tape::no_grad();
        let x = Tensor::from_vec((0..2 * 2 * 3 * 3 * 3).map(|v| v as f64).collect(), &[2, 2, 3, 3, 3]).unwrap();
        let mut wid = vec![0.0; 4];
        wid[0] = 1.0;
        wid[3] = 1.0;
        let w = Tensor::from_vec(wid, &[2, 2, 1, 1, 1]).unwrap();
        let y = conv3d(&tape, &x, &w, None, 0).unwrap();
        let (xv, yv) = (x.to_vec(), y.to_vec());
        assert!(xv.iter().zip(&yv).all(|(a, b)| a.to_bits() == b.to_bits()));

        let x1 = Tensor::from_vec(vec![1.0; 5 * 5 * 5], &[1, 1, 5, 5, 5]).unwrap();
        let w1 = Tensor::from_vec(vec![1.0; 27], &[1, 1, 3, 3, 3]).unwrap();
        let y1 = conv3d(&tape, &x1, &w1, None, 1).unwrap();
        // fully interior voxel
        let v = y1.to_vec();
        let idx = (2 * 5 + 2) * 5 + 2;
        assert_eq!(v[idx], 27.0);
        assert_eq!(v[0], 8.0); // corner sees a 2x2x2 window
    }

    #[test]
    fn stride_and_output_extent() {
        let tape = Tape::no_grad();
        let x = Tensor::zeros(&[1, 1, 5, 5]).unwrap();
        let w = Tensor::zeros(&[1, 1, 3, 3]).unwrap();
        let y = conv2d(&tape, &x, &w, None, 2, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        // (5 - 2) % 2 != 0 -> error
        let w2 = Tensor::zeros(&[1, 1, 2, 2]).unwrap();
        assert!(conv2d(&tape, &x, &w2, None, 2, 0).is_err());
    }

    #[test]
    fn channel_mismatch_rejected() {
        let tape = Tape::no_grad();
        let x = Tensor::zeros(&[1, 3, 4, 4]).unwrap();
        let w = Tensor::zeros(&[2, 4, 1, 1]).unwrap();
        assert!(conv2d(&tape, &x, &w, None, 1, 0).is_err());
    }

    #[test]
    fn bias_adds_per_channel() {
        let tape = Tape::no_grad();
        let x = Tensor::zeros(&[1, 1, 2, 2]).unwrap();
        let w = Tensor::zeros(&[2, 1, 1, 1]).unwrap();
        let b = Tensor::from_vec(vec![0.5, -1.5], &[2]).unwrap();
        let y = conv2d(&tape, &x, &w, Some(&b), 1, 0).unwrap();
        assert_eq!(y.to_vec(), vec![0.5, 0.5, 0.5, 0.5, -1.5, -1.5, -1.5, -1.5]);
    }
}
