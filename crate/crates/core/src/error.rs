use std::io;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum NdppError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is singular to working precision")]
    SingularMatrix,

    #[error("matrix is not skew-symmetric (max |a + a^T| = {0:e})")]
    NotSkewSymmetric(f64),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("bad model file: {0}")]
    Format(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("subset minor has nonpositive determinant")]
    NonPositiveMinor,

    #[error("item {0} has zero occurrence count")]
    ZeroCount(usize),

    #[error("dataset contains no usable baskets")]
    EmptyDataset,

    #[error("split sizes ({val} validation + {test} test) leave no training data out of {total}")]
    SplitTooLarge { val: usize, test: usize, total: usize },

    #[error("training diverged: {0} consecutive infeasible epochs")]
    Diverged(usize),

    #[error("marginal gain degenerated after selecting {} items", selected.len())]
    DegenerateGain { selected: Vec<usize>, log_det: f64 },

    #[error("conditioning on item {0} is degenerate")]
    DegenerateConditioning(usize),

    #[error("rejection sampling exhausted after {0} tries")]
    RejectionExhausted(usize),

    #[error("basket {0} has fewer than two items")]
    BasketTooSmall(usize),

    #[error("reference log-determinant is zero")]
    ZeroReference,

    #[error("unknown items: {}", .0.join(", "))]
    UnknownItem(Vec<String>),

    #[error("bad config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, NdppError>;
