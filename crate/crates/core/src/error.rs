use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid overlap matrix: {0}")]
    InvalidOverlap(String),

    #[error("bound diverges: parameter {parameter} must be below 1")]
    Divergent { parameter: f64 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("degenerate sampler target: {proposals} consecutive proposals had zero weight")]
    DegenerateTarget { proposals: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
