use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A dataset file could not be parsed or failed validation.
    #[error("{}:{line}: {message}", file.display())]
    Load { file: PathBuf, line: usize, message: String },

    #[error("dataset is inconsistent: {0}")]
    Data(String),

    /// Operand shapes are incompatible for an operation.
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A computation produced a non-finite value or a degenerate quantity.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed container {}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// An error raised while working on a named unit, such as a fold.
    #[error("{context}: {source}")]
    Context { context: String, source: Box<Error> },
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension { op, detail: detail.into() }
    }

    pub(crate) fn load(file: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Load {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code used by the command line tool for this error.
    ///
    /// `1` usage/configuration, `2` data errors, `3` numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 1,
            Error::Load { .. } | Error::Data(_) | Error::Format { .. } | Error::Io(_) | Error::Json(_) => 2,
            Error::Dimension { .. } | Error::Numeric(_) => 3,
            Error::Context { source, .. } => source.exit_code(),
        }
    }
}
