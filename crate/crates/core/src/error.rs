use std::path::PathBuf;

use crate::geometry::SegmentId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported file format: {0}")]
    UnsupportedFormat(String),

    #[error("missing property `{0}`")]
    MissingProperty(String),

    #[error("empty point selection")]
    EmptySelection,

    #[error("segment {0} has no points")]
    EmptySegment(SegmentId),

    #[error("cloud has no points")]
    EmptyCloud,

    #[error("point index {index} out of range for cloud of {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("segments {0} and {1} are not adjacent")]
    NotAdjacent(SegmentId, SegmentId),

    #[error("point ({x}, {y}, {z}) lies outside the grid bounds")]
    OutOfBounds { x: f64, y: f64, z: f64 },

    #[error("ground-truth labels required: {0}")]
    Unlabeled(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("table too small: placed {placed} objects, at least {required} required")]
    TableTooSmall { placed: usize, required: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
