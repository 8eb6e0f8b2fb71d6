use thiserror::Error;

/// Errors surfaced by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("not a valid state: {0}")]
    InvalidState(String),

    #[error("not a valid channel: {0}")]
    InvalidChannel(String),

    #[error("guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("empty family")]
    EmptyFamily,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covering not certified: {0}")]
    CoveringNotCertified(String),

    #[error("members indistinguishable: all pairwise output distances below {0:e}")]
    Indistinguishable(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
