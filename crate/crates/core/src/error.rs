use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed image data: {0}")]
    MalformedImage(String),
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("image {width}x{height} is smaller than the {window}x{window} window")]
    ImageTooSmall {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("all points are collinear")]
    CollinearPoints,
    #[error("points {0} and {1} coincide")]
    DuplicatePoints(usize, usize),
    #[error("point ({0}, {1}) lies outside the mesh domain")]
    OutsideDomain(f64, f64),
    #[error("mesh has no vertex values")]
    ValuesUnset,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("malformed measurement record: {0}")]
    MalformedRecord(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
