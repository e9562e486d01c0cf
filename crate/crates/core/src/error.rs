use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the stylization and layout pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mask is uniform (all pixels {value}); no boundary exists")]
    UniformMask { value: bool },

    #[error("window {rect_w}x{rect_h} does not fit in a {width}x{height} field")]
    RectTooLarge {
        rect_w: usize,
        rect_h: usize,
        width: usize,
        height: usize,
    },

    #[error("pyramid with {levels} levels would shrink {width}x{height} below 8x8")]
    TooManyLevels {
        levels: usize,
        width: usize,
        height: usize,
    },

    #[error("resampling produced a degenerate {width}x{height} output")]
    DegenerateOutput { width: usize, height: usize },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("all clustering features are identical")]
    DegenerateFeatures,

    #[error("mask has no foreground pixels")]
    EmptyForeground,

    #[error("patch at ({x}, {y}) is out of bounds")]
    OutOfBounds { x: usize, y: usize },

    #[error("no placement of the text fits inside the background")]
    NoValidPlacement,

    #[error("inpainting region covers {fraction:.3} of the image (limit 0.5)")]
    RegionTooLarge { fraction: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

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

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
