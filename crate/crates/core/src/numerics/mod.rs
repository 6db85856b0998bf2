//! Dense f64 tensors with reverse-mode automatic differentiation.
//!
//! Forward ops record nodes on a [`tape::Tape`]; `Tape::backward`
//! replays them once in reverse. One graph is single-threaded by
//! contract; parallelism lives inside individual kernels and never
//! changes summation order.

pub mod gradcheck;
pub mod ops;
pub mod parallel;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use gradcheck::grad_check;
pub use rng::Rng;
pub use tape::Tape;
pub use tensor::{Fill, Tensor};
