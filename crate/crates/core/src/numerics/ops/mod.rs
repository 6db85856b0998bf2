//! Differentiable tensor operations. Each op validates its inputs,
//! computes the forward value, and records a tape node carrying the
//! backward rule when any input requires gradients.

pub mod conv;
pub mod elementwise;
pub(crate) mod gemm;
pub(crate) mod scratch;
pub mod matmul;
pub mod norm;
pub mod reduce;
pub mod shape;
pub mod softmax;

pub use conv::{conv2d, conv3d};
pub use elementwise::{add, mul, scale, sigmoid, silu, sub};
pub use matmul::{matmul, transpose_last2};
pub use norm::layer_norm;
pub use reduce::{reduce, ReduceKind};
pub use shape::{
    broadcast_batch, broadcast_hw, concat, depth_to_space, narrow, reshape, space_to_depth,
    swap_axes12,
};
pub use softmax::softmax;

use crate::error::{Error, Result};

pub(crate) fn expect_same_shape(op: &str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::shape(format!("{op}: {a:?} vs {b:?}")));
    }
    Ok(())
}

pub(crate) fn expect_axis(op: &str, ndim: usize, axis: usize) -> Result<()> {
    if axis >= ndim {
        return Err(Error::invalid(format!(
            "{op}: axis {axis} out of range for {ndim} dims"
        )));
    }
    Ok(())
}
