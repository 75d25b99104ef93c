use std::path::PathBuf;
use std::process::ExitCode;

use rrs_core::tensor_file::TensorFileError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        source: TensorFileError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] rrs_core::Error),
    #[error("{0}")]
    Numerical(String),
    #[error("failed to encode report: {0}")]
    Encode(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Input { source, .. } => match source {
                TensorFileError::Io(_) => 1,
                _ => 3,
            },
            CliError::Io { .. } | CliError::Encode(_) => 1,
            CliError::Core(rrs_core::Error::TensorFile(_)) => 3,
            CliError::Core(_) | CliError::Numerical(_) => 4,
        })
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
