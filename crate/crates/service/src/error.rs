use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    /// A config value that does not pass validation; `field` is a dotted path
    /// such as `stage[2].k`.
    #[error("{origin}: {field}: {message}")]
    Config {
        origin: String,
        field: String,
        message: String,
    },

    #[error("stage {index} ({op}) failed: {source}")]
    Stage {
        index: usize,
        op: String,
        #[source]
        source: geoseg::Error,
    },

    #[error(transparent)]
    Core(#[from] geoseg::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest error: {0}")]
    Manifest(String),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

impl ServiceError {
    pub fn config(origin: impl Into<String>, field: impl Into<String>, message: impl Into<String>) -> Self {
        ServiceError::Config {
            origin: origin.into(),
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ServiceError::Io {
            path: path.into(),
            source,
        }
    }

    /// The underlying toolkit error, if any.
    pub fn core(&self) -> Option<&geoseg::Error> {
        match self {
            ServiceError::Stage { source, .. } | ServiceError::Core(source) => Some(source),
            _ => None,
        }
    }

    pub fn is_cancelled(&self) -> bool {
        matches!(self.core(), Some(geoseg::Error::Cancelled))
    }
}
