use thiserror::Error;

use crate::graph::OpKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch in {kind}: {left:?} vs {right:?}")]
    ShapeMismatch {
        kind: OpKind,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("{kind} expects {expected} input(s), got {got}")]
    Arity {
        kind: OpKind,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value produced by {context}")]
    NonFinite { context: String },

    #[error("tensor of shape {shape:?} holds {len} values")]
    BadLength { shape: Vec<usize>, len: usize },

    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("node {index} is not part of this graph")]
    DanglingNode { index: usize },

    #[error("node {node} references input {input} which is not an earlier node")]
    Cycle { node: usize, input: usize },

    #[error("parameter/state length mismatch: {0}")]
    StateMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, AutodiffError>;
