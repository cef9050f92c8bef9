use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate label grid: {0}")]
    DegenerateGrid(String),

    /// A value left the domain of a log, division or similar.
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    /// Input has no variance (or similar) where the statistic needs some.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The unoccluded baseline error is zero, so relative degradation is undefined.
    #[error("degenerate baseline: {0}")]
    DegenerateBaseline(String),

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("I/O error on {path}: {source}")]
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

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the arithmetic itself rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalDomain(_) | Error::NonFinite(_))
    }
}
