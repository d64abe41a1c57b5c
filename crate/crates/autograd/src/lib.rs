//! A small dense `f64` tensor library with tape-free reverse-mode automatic
//! differentiation.
//!
//! Values are [`Tensor`]s; differentiable computations are built from [`Var`]s,
//! which remember the operation that produced them. Calling [`Var::backward`] on a
//! scalar returns the gradients of every reachable [`Var::leaf`].
//!
//! Everything runs single-threaded in a fixed order, so results are bit-for-bit
//! reproducible for identical inputs.

pub mod gradcheck;
mod ops;
mod tensor;
mod var;

pub use tensor::Tensor;
pub use var::{Gradients, Var};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, Error>;
