//! Reverse-mode automatic differentiation over dense rank-1/rank-2 tensors.
//!
//! A [`Tape`] is rebuilt for every training step. Trainable parameters enter
//! it through [`Tape::param`], everything else through [`Tape::constant`];
//! [`Tape::backward`] then returns one gradient per parameter leaf.

mod gradcheck;
mod tape;
mod tensor;

use thiserror::Error;

pub use gradcheck::{finite_difference_grad, max_relative_error};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("tensors must have rank 1 or 2, got rank {0}")]
    Rank(usize),
    #[error("shape {shape:?} needs {} entries, got {len}", shape.iter().product::<usize>())]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
    #[error("{op} produced a non-finite value at index {index}")]
    NonFiniteResult { op: &'static str, index: usize },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("rows have different lengths")]
    RaggedRows,
    #[error("{0} of an empty tensor")]
    Empty(&'static str),
    #[error("expected a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("node {0} is not on this tape")]
    UnknownNode(usize),
    #[error("leaky relu slope must lie in (0, 1), got {0}")]
    Slope(f64),
}

impl AutodiffError {
    pub(crate) fn shape(op: &'static str, a: &Tensor, b: &Tensor) -> Self {
        AutodiffError::Shape {
            op,
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        }
    }
}
