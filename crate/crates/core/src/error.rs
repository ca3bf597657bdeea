use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("invalid detection: {0}")]
    InvalidDetection(String),

    #[error("non-finite measurement passed to Kalman update")]
    NonFiniteMeasurement,

    #[error("innovation covariance is singular; track state is degenerate")]
    SingularCovariance,

    #[error("frame {got} arrived after frame {last}; frames must be strictly increasing")]
    FrameOrder { last: u64, got: u64 },

    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    EmbeddingDim { expected: usize, got: usize },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("actual count must be positive, got {0}")]
    ZeroActualCount(i64),

    #[error("average precision needs at least one ground-truth box")]
    NoGroundTruth,

    #[error("no sprite available for class {0}")]
    MissingSpriteClass(u32),

    #[error("image {image}: could not place kernel {kernel} after {attempts} attempts")]
    PlacementFailed {
        image: usize,
        kernel: usize,
        attempts: usize,
    },

    #[error("box {0} lies outside the {1}x{2} image")]
    OutOfBounds(String, u32, u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input to a command (as opposed to bad data).
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidConfig { .. } | Error::ZeroActualCount(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
