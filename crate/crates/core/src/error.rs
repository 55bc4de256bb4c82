use std::path::PathBuf;

/// Errors produced anywhere in the Wassmap pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("image has no positive pixel{}", index_suffix(*.index))]
    AllZeroImage { index: Option<usize> },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("axis {axis} out of range for {dim}-dimensional measure")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("network simplex exceeded the pivot limit ({pivots} pivots)")]
    NonConvergence { pivots: usize },

    #[error("unsupported instance: {0}")]
    UnsupportedInstance(String),

    #[error("sinkhorn did not converge after {iterations} iterations (marginal violation {violation:e})")]
    MaxIterExceeded { iterations: usize, violation: f64 },

    #[error("embedding dimension {dim} must satisfy 1 <= d < N = {n}")]
    DimensionTooLarge { dim: usize, n: usize },

    #[error("neighbor graph is disconnected: {} components with sizes {sizes:?}", sizes.len())]
    DisconnectedGraph { sizes: Vec<usize> },

    #[error("shape covers no raster cell center")]
    EmptyShape,

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("dilation parameter {index} is not strictly positive")]
    NonPositiveDilation { index: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("labels contain a single class")]
    DegenerateLabels,

    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated IDX file: need {needed} bytes, have {available}")]
    TruncatedFile { needed: usize, available: usize },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("class {label}: requested {requested} samples, only {available} available")]
    InsufficientClassSamples { label: u8, requested: usize, available: usize },

    #[error("pair ({i}, {j}): {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

fn index_suffix(index: Option<usize>) -> String {
    match index {
        Some(i) => format!(" (image {i})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
