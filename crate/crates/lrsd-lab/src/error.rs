use thiserror::Error;

use crate::analysis::AnalysisError;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config: {0}")]
    Config(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("circuit: {0}")]
    Circuit(#[from] lrsd_core::circuits::CircuitError),
    #[error("analysis: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
