use std::path::Path;

use fbd_core::FbdError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Io(String),

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Core(#[from] FbdError),
}

impl CliError {
    /// Machine-readable category printed before the message.
    pub fn category(&self) -> &'static str {
        match self.exit_code() {
            EXIT_USAGE => "usage",
            EXIT_IO => "io",
            EXIT_SOLVER => "solver",
            _ => "validation",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Format(_) => EXIT_VALIDATION,
            CliError::Core(e) if e.is_solver_failure() => EXIT_SOLVER,
            CliError::Core(_) => EXIT_VALIDATION,
        }
    }

    pub(crate) fn in_file(self, path: &Path) -> Self {
        match self {
            CliError::Format(m) => CliError::Format(format!("{}: {m}", path.display())),
            other => other,
        }
    }
}
