use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point fell outside the grid's bounding box.
    #[error("point ({x}, {y}) is outside the bounding box: {axis} coordinate {value} not in [{min}, {max}]")]
    OutOfDomain {
        x: f64,
        y: f64,
        axis: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// An argument violated its documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Reports or estimates that cannot be combined.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// A data structure invariant does not hold.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
