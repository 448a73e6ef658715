use thiserror::Error;

use crate::symmetry::GroupId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-positive jacobian: det F = {0}")]
    NonPositiveJacobian(f64),
    #[error("group {0} is not supported here")]
    UnsupportedGroup(GroupId),
    #[error("tensor is not orthogonal (deviation {0:.3e})")]
    NotOrthogonal(f64),
    #[error("tensor is not symmetric positive definite")]
    NotSpd,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("slot {slot} of basis {basis} is not a polyconvex invariant")]
    SlotNotPolyconvex { basis: String, slot: usize },
    #[error("degenerate basis point: {0}")]
    DegenerateBasisPoint(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("non-finite loss at step {0}")]
    NonFiniteLoss(usize),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("variant {0} is not polyconvex")]
    VariantNotPolyconvex(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
