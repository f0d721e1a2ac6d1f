use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("invalid angle: {0}")]
    InvalidAngle(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("insufficient data for group {group}: {count} repetition(s), need at least {needed}")]
    InsufficientData {
        group: String,
        count: usize,
        needed: usize,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("leakage between splits: {}", ids.join(", "))]
    Leakage { ids: Vec<String> },
    #[error("{}: row {row}: {message}", path.display())]
    Validation {
        path: PathBuf,
        row: usize,
        message: String,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// True for violated internal invariants (e.g. split leakage).
    pub fn is_invariant_violation(&self) -> bool {
        matches!(self, Error::Leakage { .. })
    }

    /// True for errors caused by malformed or inconsistent input data rather
    /// than by the caller's configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::Validation { .. }
                | Error::InvalidRotation(_)
                | Error::InvalidAngle(_)
                | Error::InsufficientData { .. }
        )
    }
}
