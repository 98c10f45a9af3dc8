use std::path::{Path, PathBuf};

/// Failures of a command, each with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or a request the modules refuse. Messages carry
    /// `file:line:` when a position is known.
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

impl From<mixeig_core::Error> for CliError {
    fn from(e: mixeig_core::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
