use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] dtmeasure_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// A file that could not be parsed; `message` carries the row or line.
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Validation(String),
    /// An upstream artifact is missing or no longer matches its recorded
    /// digest. `stage` is the subcommand that has to be re-run.
    #[error("{message}; re-run `dtmeasure {stage}`")]
    Stale { stage: String, message: String },
    #[error("remote classifier failed on batch {batch}: {message}")]
    Remote { batch: usize, message: String },
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn format(path: impl AsRef<Path>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().to_path_buf(),
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    /// Process exit status: 2 for invalid input or configuration, 3 for a
    /// stale or missing upstream stage, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Core(_) | Error::Format { .. } | Error::Validation(_) => 2,
            Error::Stale { .. } => 3,
            Error::Io { .. } | Error::Remote { .. } => 1,
        }
    }
}
