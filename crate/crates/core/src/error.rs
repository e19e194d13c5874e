use thiserror::Error;

/// Errors raised across the library.
///
/// The variants are grouped by the kind of failure so that front ends can map
/// them onto stable exit codes (configuration, data, numeric).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A distribution or algorithm parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// Vector or matrix dimensions do not agree.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    /// Input values are unusable (non-finite, empty, malformed labels).
    #[error("invalid input: {0}")]
    Input(String),
    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    /// Floating point overflow or non-finite intermediate result.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Inconsistent or missing configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Problems reading or parsing external data.
    #[error("data error: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
