//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by container construction, file I/O, and the numeric
/// operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed PFM stream. `offset` is the byte position at which parsing
    /// failed.
    #[error("pfm format error at byte {offset}: {message}")]
    PfmFormat { offset: u64, message: String },

    #[error("png format error on {path}: {message}")]
    PngFormat { path: PathBuf, message: String },

    #[error("invalid grid dimensions {width}x{height}: {message}")]
    InvalidDimensions {
        width: usize,
        height: usize,
        message: &'static str,
    },

    #[error("dimension mismatch: {context} expects {expected_width}x{expected_height}, got {actual_width}x{actual_height}")]
    DimensionMismatch {
        context: &'static str,
        expected_width: usize,
        expected_height: usize,
        actual_width: usize,
        actual_height: usize,
    },

    #[error("non-finite value at pixel ({x}, {y}) in {context}")]
    NonFinite { context: &'static str, x: usize, y: usize },

    #[error("invalid normal at pixel ({x}, {y}): {message}")]
    InvalidNormal { x: usize, y: usize, message: String },

    #[error("channel value {value} outside [0, 1] at pixel ({x}, {y})")]
    ChannelOutOfRange { x: usize, y: usize, value: f64 },

    /// Decoded normal vectors with zero length; coordinates of every
    /// offending pixel are retained.
    #[error("{}", format_degenerate(.pixels))]
    DegeneratePixels { pixels: Vec<(usize, usize)> },

    #[error("mask has no valid pixels")]
    EmptyMask,

    #[error("mask length {len} does not match {width}x{height} grid")]
    MaskShape { len: usize, width: usize, height: usize },

    #[error("undefined normalizer: ground-truth maximum is not positive")]
    UndefinedNormalizer,

    #[error("invalid range [{lo}, {hi}]: {message}")]
    InvalidRange { lo: f64, hi: f64, message: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("image {width}x{height} smaller than the {window}x{window} ssim window")]
    ImageTooSmall { width: usize, height: usize, window: usize },
}

fn format_degenerate(pixels: &[(usize, usize)]) -> String {
    let shown: Vec<String> = pixels
        .iter()
        .take(8)
        .map(|(x, y)| format!("({x}, {y})"))
        .collect();
    let suffix = if pixels.len() > 8 {
        format!(" and {} more", pixels.len() - 8)
    } else {
        String::new()
    };
    format!(
        "degenerate zero-length normal at {} pixel(s): {}{}",
        pixels.len(),
        shown.join(", "),
        suffix
    )
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn dims(
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected_width: expected.0,
            expected_height: expected.1,
            actual_width: actual.0,
            actual_height: actual.1,
        }
    }
}
