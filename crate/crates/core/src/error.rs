use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid ray map: {0}")]
    InvalidRays(String),
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("no connected component with at least {needed} views (largest has {largest})")]
    InsufficientComponent { needed: usize, largest: usize },
    #[error("numeric overflow in {0}")]
    NumericOverflow(String),
    #[error("retry budget exhausted: {0}")]
    RetryExhausted(String),
    #[error("invalid modality `{0}` (expected one of rays, pose, depth, sparse-depth, metric)")]
    InvalidModality(String),
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Stable machine-readable category, printed by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidIntrinsics(_) => "invalid-intrinsics",
            Error::InvalidRays(_) => "invalid-rays",
            Error::InvalidRotation(_) => "invalid-rotation",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::RankDeficient(_) => "rank-deficient",
            Error::Degenerate(_) => "degenerate",
            Error::Empty(_) => "empty",
            Error::InsufficientComponent { .. } => "insufficient-component",
            Error::NumericOverflow(_) => "numeric-overflow",
            Error::RetryExhausted(_) => "retry-exhausted",
            Error::InvalidModality(_) => "invalid-modality",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
