//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("target returned NaN")]
    NanFromTarget,

    #[error("start point has non-finite log prior")]
    StartOutsideSupport,

    #[error("prior support mismatch: no valid sample after {attempts} attempts")]
    PriorSupportMismatch { attempts: usize },

    #[error("gradient required but target does not provide one")]
    MissingGradient,

    #[error("zero gradient: reflection normal is degenerate")]
    ZeroGradient,

    #[error("proposal covariance is singular")]
    SingularProposal,

    #[error("degenerate bandwidth: all pooled pairwise distances are zero")]
    DegenerateBandwidth,

    #[error("empty dead list")]
    EmptyDeadList,

    #[error("all weights are zero")]
    AllZeroWeights,

    #[error("sample count mismatch: {left} vs {right}")]
    SampleCountMismatch { left: usize, right: usize },

    #[error("temperature ladder did not reach 1.0 within {max} stages")]
    MaxStagesExceeded { max: usize },

    #[error("no termination after {max} outer iterations")]
    NoTermination { max: u64 },
}
