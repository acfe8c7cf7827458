use std::io;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: need {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("training diverged in layer {layer} at epoch {epoch}")]
    TrainingDiverged { layer: usize, epoch: usize },

    #[error("class {0} has no samples")]
    UndefinedClass(usize),

    #[error("label {0} is out of range")]
    LabelOutOfRange(u8),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { expected: u16, found: u16 },

    #[error("file truncated while reading {0}")]
    Truncated(String),

    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),

    #[error("invalid layer index {index} (network has {layers} hidden layers)")]
    InvalidLayer { index: usize, layers: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
