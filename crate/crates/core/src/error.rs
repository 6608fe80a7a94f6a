use std::path::PathBuf;

/// Errors raised by the laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument falls outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Exact enumeration would exceed the configured cap.
    #[error("enumeration of {requested} sequences exceeds cap {cap}")]
    Size { requested: u128, cap: usize },
    /// A non-finite value reached a numeric routine.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Reward variance is zero, so advantages are undefined.
    #[error("degenerate group or query: {0}")]
    Degenerate(String),
    /// No valid group survived filtering.
    #[error("empty batch: no valid groups")]
    EmptyBatch,
    /// Configuration could not be parsed or validated.
    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            key: Some(key.into()),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
