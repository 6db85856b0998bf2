//! Desk-scale multi-in multi-out (MIMO) video prediction.
//!
//! Everything runs on the CPU on top of a small reverse-mode autodiff
//! tensor library (`numerics`). The `model` module implements the
//! encoder/decoder predictor with convolutional temporal attention and
//! 3D-convolution feed-forward blocks; `baselines`, `data`, `metrics`
//! and `training` supply the surrounding experiment machinery.

pub mod baselines;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
pub use numerics::tensor::Tensor;
