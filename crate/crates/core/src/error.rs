use std::path::PathBuf;

/// Everything that can go wrong inside the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("singular matrix: pivot {pivot:e} at column {column}")]
    Singular { column: usize, pivot: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate control-point configuration: {0}")]
    Degenerate(String),

    #[error("missing parameter `{0}`")]
    MissingParameter(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated input: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("duplicate entry `{0}`")]
    DuplicateEntry(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by a numerically degenerate configuration
    /// rather than by malformed input.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::Singular { .. } | Error::Degenerate(_))
    }
}
