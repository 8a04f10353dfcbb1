//! Reverse-mode automatic differentiation over a small, fixed set of tensor
//! primitives.
//!
//! A [`Graph`] records operations eagerly: each call computes its value and
//! appends a node. [`Graph::backward`] walks the tape in reverse. Graphs are
//! single-threaded; build one per forward pass.

mod adam;
pub mod gradcheck;
mod graph;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use graph::{Gradients, Graph, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, GraphError>;
