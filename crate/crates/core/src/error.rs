use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the extraction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image header: {0}")]
    CorruptHeader(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pixel ({x}, {y}) is outside the {width}x{height} image")]
    OutOfBounds {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },
    #[error("end point ({x}, {y}) is unreachable from the start point")]
    Unreachable { x: usize, y: usize },
    #[error("vertex ({x}, {y}) has not been settled")]
    NotSettled { x: usize, y: usize },
    #[error("degenerate path: {0}")]
    DegeneratePath(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },
    #[error("training set contains a single class")]
    SingleClass,
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    #[error("model file has wrong magic bytes")]
    MagicMismatch,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("model layer shapes do not chain: {0}")]
    ShapeChain(String),
    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("annotation point ({x}, {y}) is out of bounds ({bounds})")]
    AnnotationOutOfBounds { x: f64, y: f64, bounds: String },
    #[error("annotation too short: longest centerline is {length:.2} px, need {required:.2} px")]
    AnnotationTooShort { length: f64, required: f64 },
    #[error("requested {requested_pos} positive / {requested_neg} negative samples, only {achieved_pos} / {achieved_neg} reachable")]
    CountsUnreachable {
        requested_pos: usize,
        requested_neg: usize,
        achieved_pos: usize,
        achieved_neg: usize,
    },
    #[error("trap validation failed after {attempts} attempts: {reason}")]
    TrapValidation { attempts: usize, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no segmented paths to evaluate")]
    EmptyPaths,
    #[error("ground truth is empty")]
    EmptyGroundTruth,
}

pub type Result<T> = std::result::Result<T, Error>;
