use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse config {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("query ({x}, {y}) lies outside the terrain extent")]
    OutOfExtent { x: f64, y: f64 },

    #[error("point is behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown label color {color:?} at pixel ({x}, {y})")]
    UnknownColor { x: u32, y: u32, color: [u8; 3] },

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("file sets differ: {0}")]
    FileSetMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input (config, flags) rather than the
    /// runtime environment.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::ConfigParse { .. } | Error::ConfigInvalid(_) | Error::InvalidArgument(_)
        )
    }
}
