use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the transmit / channel / receive chain.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is inconsistent (bad sample rates, missing model, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument violates an operation's precondition.
    #[error("invalid input: {0}")]
    Input(String),
    /// Input that cannot be processed meaningfully, such as a constant signal.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// The request exceeds what an exact (enumerating) routine can handle.
    #[error("capability exceeded: {0}")]
    Capability(String),
    #[error("pilot detection failed: {0}")]
    DetectionFailed(String),
    #[error("doppler estimation failed: {0}")]
    Estimation(String),
    #[error("malformed data: {0}")]
    Format(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

/// Returns early with the given variant unless `$cond` holds. A NaN
/// comparison counts as failing.
macro_rules! ensure {
    ($cond:expr, $variant:ident, $($arg:tt)+) => {
        if ::std::ops::Not::not($cond) {
            return Err($crate::error::Error::$variant(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
