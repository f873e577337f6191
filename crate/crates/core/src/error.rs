use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("order {order} too large for a series of length {len}")]
    OrderTooLarge { order: usize, len: usize },

    #[error("series too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("no training blocks remain after leave-out")]
    EmptyAfterLeaveOut,

    #[error("all kernel weights underflowed; bandwidths are pathological")]
    DegenerateWeights,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("optimizer failed: no start produced a finite cross-validation score")]
    OptimizerFailure,

    #[error("quadrature did not reach tolerance {tol:e} within {panels} panels (estimated error {err:e})")]
    QuadratureNonConvergence { tol: f64, panels: usize, err: f64 },

    #[error("series carries no timestamps")]
    MissingTimestamps,

    #[error("no template matches at tolerance r={r}; increase r")]
    NoMatches { r: f64 },

    #[error("embedding vector {index} has no neighbour within r={r} other than itself")]
    IsolatedVector { index: usize, r: f64 },

    #[error("state is ambiguous: a past value is exactly zero")]
    AmbiguousState,

    #[error("integration produced a non-finite state at t={time}")]
    NonFiniteState { time: f64 },

    #[error("accumulated signal never reached the threshold")]
    NoEvents,

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
