//! Reverse-mode differentiation over dense `f64` tensors.
//!
//! Just enough machinery for the three fixed networks in [`crate::models`]:
//! matrix products, row-broadcast arithmetic, a handful of pointwise
//! nonlinearities, reductions and column slicing. A [`Graph`] is a tape that
//! is built, swept backward once, and dropped.

mod graph;
mod tensor;

pub use graph::{Graph, Var};
pub use tensor::Tensor;


use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} needs {} elements, got {len}", shape.iter().product::<usize>())]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward needs a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("slice {start}..{end} out of range for shape {shape:?}")]
    Slice {
        shape: Vec<usize>,
        start: usize,
        end: usize,
    },
}
