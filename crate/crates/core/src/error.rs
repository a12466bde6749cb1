use thiserror::Error;

/// Errors raised by the pricing engine.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Input data violates a structural invariant.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Matrix or vector dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A linear system could not be solved.
    #[error("singular system: {0}")]
    Singular(String),
    /// An iterative or spectral routine broke down.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A computed error estimate exceeds the requested tolerance.
    #[error("{what}: error estimate {estimate:e} above tolerance {tol:e}")]
    Tolerance { what: String, estimate: f64, tol: f64 },
}

impl Error {
    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_input(&self) -> bool {
        matches!(self, Error::Invalid(_) | Error::Domain(_) | Error::Dimension(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
