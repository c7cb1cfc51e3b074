use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("{0}")]
    Input(String),

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 usage, 2 data or I/O, 3 solver divergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data { .. } | CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Divergence(_) => 3,
        }
    }

    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Data {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

impl From<jdag_core::Error> for CliError {
    fn from(e: jdag_core::Error) -> Self {
        match e {
            jdag_core::Error::Divergence { .. } => CliError::Divergence(e.to_string()),
            jdag_core::Error::InvalidArgument(m) => CliError::Usage(m),
            jdag_core::Error::UndefinedMeasure(m) => CliError::Input(m),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
