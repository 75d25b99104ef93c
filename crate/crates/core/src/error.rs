use thiserror::Error;

use crate::tensor_file::TensorFileError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("matrix element at ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    Validation(String),

    #[error("unsupported rotation dimension {dim}: Hadamard rotations require a power of two")]
    UnsupportedDimension { dim: usize },

    #[error("undefined smoothness metric: {0}")]
    UndefinedMetric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    TensorFile(#[from] TensorFileError),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
