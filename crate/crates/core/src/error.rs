//! Unified error type for the whole pipeline.

use std::path::PathBuf;

use crate::tensor::Shape4;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two tensors (or a tensor and a layer) disagree on shape.
    #[error("{context}: shape mismatch between {left} and {right}")]
    ShapeMismatch {
        context: &'static str,
        left: Shape4,
        right: Shape4,
    },

    /// A spatial/channel precondition failed that is not a two-shape mismatch.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Invalid configuration (bad stride, non-integer conv output, bad severity, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// API contract violated (e.g. backward on a non-scalar).
    #[error("contract error: {0}")]
    Contract(String),

    /// Optimizer state does not match the parameter set.
    #[error("optimizer state error: {0}")]
    State(String),

    /// Training pair is inconsistent (shape or length).
    #[error("pairing error: {0}")]
    Pairing(String),

    /// Loss became non-finite during training.
    #[error("divergence at epoch {epoch}, frame {frame}: loss is not finite")]
    Divergence { epoch: usize, frame: usize },

    /// Restoration produced unusable values while scoring.
    #[error("scoring error: {0}")]
    Scoring(String),

    /// Correlation input has zero variance.
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    /// Malformed file contents (weights, y4m, manifest, frame directory).
    #[error("format error: {0}")]
    Format(String),

    /// A byte stream ended at the wrong place.
    #[error("size error for {path}: expected {expected} bytes, got {actual}")]
    Size {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    /// Manifest is structurally invalid.
    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    /// Wraps an I/O failure with the path it happened on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
