use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {cause}")]
    Io {
        path: PathBuf,
        cause: std::io::Error,
    },

    #[error("failed to decode {path}: {cause}")]
    Decode {
        path: PathBuf,
        cause: image::ImageError,
    },

    #[error("failed to encode {path}: {cause}")]
    Encode {
        path: PathBuf,
        cause: image::ImageError,
    },

    #[error("unsupported image format for {path} (PNG and JPEG only)")]
    UnsupportedFormat { path: PathBuf },

    /// A dimension is below 8 or not a multiple of 8.
    #[error("{axis} {size} is not a positive multiple of 8")]
    Dimension { axis: &'static str, size: u32 },

    #[error("dimension mismatch: {expected_width}x{expected_height} vs {got_width}x{got_height}")]
    DimensionMismatch {
        expected_width: u32,
        expected_height: u32,
        got_width: u32,
        got_height: u32,
    },

    #[error("image {width}x{height} is smaller than the required {min}x{min}")]
    TooSmall { width: u32, height: u32, min: u32 },

    #[error("embedding capacity exceeded: pool of {pool} coefficients cannot carry {bits} bits")]
    Capacity { pool: usize, bits: usize },

    #[error("trait length mismatch: {left} vs {right} bits")]
    TraitLength { left: usize, right: usize },

    #[error("invalid trait hex {value:?}: {reason}")]
    TraitHex { value: String, reason: String },

    #[error("bit count {n} out of range (1..={max})")]
    BitCount { n: usize, max: usize },

    #[error("feature vector contains a non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("candidate pool is empty")]
    EmptyPool,

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
