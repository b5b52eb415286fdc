use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Parameters or inputs that violate a stated invariant.
    #[error("configuration error: {0}")]
    Config(String),
    /// Two objects that should share a cell/support structure do not.
    #[error("structural mismatch: {0}")]
    Structure(String),
    /// The integrator's step is too coarse for the requested accuracy.
    #[error("step size too large: {0}")]
    StepSize(String),
    /// A numerical procedure failed to converge or hit a degenerate case.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The request is outside what an exact method can afford.
    #[error("refused: {0}")]
    Refused(String),
    /// Statistical input too small for the requested test.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
