use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the partitioning library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid shape {rows}x{cols}x{channels}: {reason}")]
    InvalidShape {
        rows: usize,
        cols: usize,
        channels: usize,
        reason: &'static str,
    },
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("non-finite value at pixel ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("displacement at pixel ({row}, {col}) points to ({target_row}, {target_col}), outside the grid")]
    OutOfGrid {
        row: usize,
        col: usize,
        target_row: i64,
        target_col: i64,
    },
    #[error("no admissible displacement for pixel ({row}, {col})")]
    EmptySearch { row: usize, col: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("signal of length {len} exceeds the brute-force cap of {cap}")]
    LengthCap { len: usize, cap: usize },
    #[error("box constraints are only supported for disparity")]
    BoxFlowUnsupported,
    #[error("u-update produced a non-finite value at pixel ({row}, {col})")]
    NonfinitePixel { row: usize, col: usize },
    #[error("iteration {iteration}: {what} violated ({lhs} > {rhs})")]
    InvariantViolated {
        iteration: usize,
        what: &'static str,
        lhs: f64,
        rhs: f64,
    },
    #[error("{path}: unsupported image format: {detail}")]
    UnsupportedFormat { path: PathBuf, detail: String },
    #[error("{path}: corrupt or truncated file: {detail}")]
    CorruptHeader { path: PathBuf, detail: String },
    #[error("{path}: bad .flo magic {found:?}")]
    BadMagic { path: PathBuf, found: [u8; 4] },
    #[error("{path}: size mismatch: {detail}")]
    SizeMismatch { path: PathBuf, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
