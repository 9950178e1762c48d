use std::path::PathBuf;

/// Errors produced by the voxelray pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric input outside the domain of a physical formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A value object failed its invariant check.
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error("rendering failed: {0}")]
    Render(String),

    #[error("transmitter sampling failed: {0}")]
    Sampling(String),

    /// Malformed or incompatible file contents.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Hdf5(#[from] hdf5::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by unreadable or malformed inputs, as opposed to
    /// numeric or precondition failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Format(_) | Error::Io { .. } | Error::Json(_) | Error::Hdf5(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
