use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(tracerec::Error),
    /// The algorithm ran and reported failure.
    #[error("{0}")]
    Algorithmic(String),
    #[error(transparent)]
    Library(#[from] tracerec::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        use tracerec::Error as E;
        ExitCode::from(match self {
            CliError::Usage(_) | CliError::Parse(_) => 2,
            CliError::Algorithmic(_) => 1,
            CliError::Library(e) => match e {
                E::InvalidArgument(_) | E::Parse { .. } => 2,
                E::Solver(_) => 1,
                E::ResourceLimit(_) => 3,
            },
        })
    }
}

/// Attaches a file name to a parse error.
pub fn in_file(path: &std::path::Path, e: tracerec::Error) -> CliError {
    match e {
        tracerec::Error::Parse {
            line,
            column,
            message,
        } => CliError::Parse(tracerec::Error::Parse {
            line,
            column,
            message: format!("{}: {message}", path.display()),
        }),
        other => CliError::Library(other),
    }
}
