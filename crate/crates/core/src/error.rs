use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HawkError>;

#[derive(Debug, Error)]
pub enum HawkError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("mesh {0} has no triangles")]
    EmptyMesh(PathBuf),

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("path length {length_m:.3} m exceeds the unambiguous round-trip length {limit_m:.3} m")]
    UnambiguousRange { length_m: f64, limit_m: f64 },

    #[error("degenerate point cloud: {0}")]
    Degenerate(String),

    #[error("invalid scene: {0}")]
    Scene(String),
}

impl HawkError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HawkError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        HawkError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
