use thiserror::Error;

/// Errors raised by the library.
///
/// Algorithmic failure (an infeasible LP, an ambiguous assembly) is not an
/// error: those paths return a value describing the failure.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The instance is too large for the configured enumeration guard, grid
    /// size or sample cap.
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn resource(msg: impl Into<String>) -> Error {
    Error::ResourceLimit(msg.into())
}
