//! Reverse-mode automatic differentiation over dense row-major `f64` tensors.
//!
//! A [`Graph`] is a single-use tape: leaves are registered with
//! [`Graph::param`] or [`Graph::constant`], every operation on a [`Var`]
//! appends a node, and [`Graph::backward`] walks the nodes in reverse
//! recording order to accumulate gradients for every leaf that requires them.
//!
//! All reductions sum strictly left to right, so repeated evaluation of the
//! same graph is bit-identical.

mod error;
mod grad_check;
mod graph;
mod kernels;
mod tensor;

pub use error::AdError;
pub use grad_check::{grad_check, grad_check_at, numerical_gradient};
pub use graph::{Gradients, Graph, Var};
pub use tensor::Tensor;

/// Variance stabilizer used by [`Var::layer_norm`].
pub const LAYER_NORM_EPS: f64 = 1e-5;

pub type Result<T> = std::result::Result<T, AdError>;
