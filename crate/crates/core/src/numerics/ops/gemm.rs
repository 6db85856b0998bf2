//! f64 matrix-multiply kernel shared by `matmul` and the convolution
//! lowering. Accumulation order within each output element is fixed
//! (ascending k), so results are bitwise reproducible for any thread
//! count.

use crate::numerics::parallel;

const MR: usize = 4; // rows per register tile
const NR: usize = 16; // cols per register tile

/// c[m,n] += a[m,k] * b[k,n], all row-major.
pub fn gemm_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    gemm(m, k, n, a, b, c, true);
}

/// c[m,n] = a[m,k] * b[k,n]; `c` may hold garbage on entry.
pub fn gemm_set(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    gemm(m, k, n, a, b, c, false);
}

fn gemm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], acc: bool) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || k == 0 || n == 0 {
        if !acc {
            c.fill(0.0);
        }
        return;
    }
    parallel::for_row_chunks(c, n, |row0, c_chunk| {
        let rows = c_chunk.len() / n;
        gemm_rows(row0, rows, k, n, a, b, c_chunk, acc);
    });
}

fn gemm_rows(
    row0: usize,
    rows: usize,
    k: usize,
    n: usize,
    a: &[f64],
    b: &[f64],
    c: &mut [f64],
    acc: bool,
) {
    // Keep the larger operand streaming through memory exactly once:
    // tall outputs iterate row tiles outermost (B stays cached), wide
    // flat outputs iterate column tiles outermost (A stays cached).
    if rows >= n {
        let mut i = 0;
        while i < rows {
            let ib = MR.min(rows - i);
            gemm_tile_row(row0 + i, ib, k, n, a, b, &mut c[i * n..], acc);
            i += MR;
        }
    } else {
        let mut j = 0;
        while j < n {
            let jb = NR.min(n - j);
            let mut i = 0;
            while i < rows {
                let ib = MR.min(rows - i);
                gemm_block(row0 + i, ib, k, n, j, jb, a, b, &mut c[i * n..], acc);
                i += MR;
            }
            j += NR;
        }
    }
}

/// All column tiles for one row tile.
fn gemm_tile_row(
    arow0: usize,
    ib: usize,
    k: usize,
    n: usize,
    a: &[f64],
    b: &[f64],
    c: &mut [f64],
    acc: bool,
) {
    let mut j = 0;
    while j < n {
        let jb = NR.min(n - j);
        gemm_block(arow0, ib, k, n, j, jb, a, b, c, acc);
        j += NR;
    }
}

#[inline]
fn gemm_block(
    arow0: usize,
    ib: usize,
    k: usize,
    n: usize,
    j: usize,
    jb: usize,
    a: &[f64],
    b: &[f64],
    c: &mut [f64],
    acc: bool,
) {
    if ib == MR && jb == NR {
        micro_kernel(&a[arow0 * k..], k, n, &b[j..], &mut c[j..], acc);
    } else {
        edge_kernel(&a[arow0 * k..], ib, k, n, j, jb, b, c, acc);
    }
}

/// MR x NR register tile; accumulators live in registers for the whole
/// k loop.
#[inline]
fn micro_kernel(a: &[f64], k: usize, n: usize, b: &[f64], c: &mut [f64], acc: bool) {
    let mut t = [[0.0f64; NR]; MR];
    for kk in 0..k {
        let bv: &[f64] = &b[kk * n..kk * n + NR];
        for (r, tr) in t.iter_mut().enumerate() {
            let ar = a[r * k + kk];
            for j in 0..NR {
                tr[j] = ar.mul_add(bv[j], tr[j]);
            }
        }
    }
    for (r, tr) in t.iter().enumerate() {
        let crow = &mut c[r * n..r * n + NR];
        if acc {
            for j in 0..NR {
                crow[j] += tr[j];
            }
        } else {
            crow.copy_from_slice(tr);
        }
    }
}

/// Remainder rows/cols: same ascending-k order as the tile path.
#[allow(clippy::too_many_arguments)]
fn edge_kernel(
    a: &[f64],
    rows: usize,
    k: usize,
    n: usize,
    j0: usize,
    jb: usize,
    b: &[f64],
    c: &mut [f64],
    acc: bool,
) {
    for r in 0..rows {
        let arow = &a[r * k..(r + 1) * k];
        let crow = &mut c[r * n + j0..r * n + j0 + jb];
        if !acc {
            crow.fill(0.0);
        }
        for (kk, &av) in arow.iter().enumerate() {
            let brow = &b[kk * n + j0..kk * n + j0 + jb];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv = av.mul_add(*bv, *cv);
            }
        }
    }
}

/// out[n,m] = transpose of x[m,n].
pub fn transpose(m: usize, n: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), m * n);
    debug_assert_eq!(out.len(), m * n);
    const B: usize = 32;
    for i0 in (0..m).step_by(B) {
        for j0 in (0..n).step_by(B) {
            for i in i0..(i0 + B).min(m) {
                for j in j0..(j0 + B).min(n) {
                    out[j * m + i] = x[i * n + j];
                }
            }
        }
    }
}
