use std::path::PathBuf;

use thiserror::Error;

use sweepscope_core::CoreError;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("input table: {0}")]
    Input(String),

    #[error("run directory {0}: {1}")]
    RunDir(PathBuf, String),

    #[error("request rejected: {0}")]
    Rejected(String),

    #[error("every iteration failed")]
    NoIterations,
}

impl ServiceError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| ServiceError::Io { path, source }
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
