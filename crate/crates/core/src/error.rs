use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("task {task} has {n_samples} samples, at least {required} required")]
    TaskTooSmall {
        task: usize,
        n_samples: usize,
        required: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid distance matrix: {0}")]
    InvalidDistances(String),

    #[error("cluster count {k} outside [{min}, {max}]")]
    ClusterCount { k: usize, min: usize, max: usize },

    #[error("unknown task id {0}")]
    UnknownTask(usize),

    #[error("distribution not normalized: {0}")]
    NotNormalized(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
