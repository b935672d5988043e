use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate histogram: {0}")]
    DegenerateHistogram(String),

    #[error("infeasible cluster count: {0}")]
    InfeasibleK(String),

    #[error("coordinate error: {0}")]
    Coordinate(String),

    #[error("ill-conditioned system: {0}")]
    Conditioning(String),

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("empty phase: {0}")]
    EmptyPhase(String),

    #[error("overlapping intensity ranges: {0}")]
    RangeOverlap(String),

    #[error("undefined ROC: {0}")]
    UndefinedRoc(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("operation cancelled")]
    Cancelled,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
