use std::path::PathBuf;

use crate::qp::QpStatus;

pub type Result<T> = std::result::Result<T, DdpcError>;

#[derive(Debug, thiserror::Error)]
pub enum DdpcError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("sample index {index} out of range for signal of length {len}")]
    OutOfRange { index: usize, len: usize },

    #[error("insufficient data: need at least {required} samples, got {available}")]
    InsufficientData { required: usize, available: usize },

    #[error(
        "rank deficient data matrix: numerical rank {rank} of {expected} \
         (past block rank {past_rank} of {past_expected})"
    )]
    RankDeficient {
        rank: usize,
        expected: usize,
        past_rank: usize,
        past_expected: usize,
    },

    #[error("singular block {block}")]
    Singular { block: &'static str },

    #[error("inconsistent linear system: residual norm {residual:e}")]
    Residual { residual: f64 },

    #[error("system is not minimal ({0})")]
    NotMinimal(&'static str),

    #[error("predictor matrix A-KC is not strictly stable (spectral radius {radius})")]
    UnstablePredictor { radius: f64 },

    #[error("no stabilizing K found after {draws} draws")]
    GainSamplingExhausted { draws: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("{scheme}: QP solver returned {status:?}")]
    Solver { scheme: String, status: QpStatus },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl DdpcError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        DdpcError::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DdpcError::Io {
            path: path.into(),
            source,
        }
    }
}
