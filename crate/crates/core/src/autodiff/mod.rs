//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Models build their forward pass on a [`Graph`] that borrows a
//! [`ParamStore`]; [`Graph::backward`] then returns [`Gradients`] for every
//! stored parameter. Training and gradient checks run in 64-bit; nothing here
//! prevents a 32-bit inference port, but this crate does not ship one.

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::{finite_difference_check, relative_error, GradCheckReport, REL_ERROR_FLOOR};
pub use graph::{log_softmax, Graph, OpKind, Var};
pub use params::{Gradients, ParamId, ParamStore};
pub use tensor::Tensor;
