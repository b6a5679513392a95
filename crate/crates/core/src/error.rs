//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QthsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("spectral point outside the admissible sector: {0}")]
    Domain(String),

    #[error("c0 calibration failed: {0}")]
    Calibration(String),

    #[error("near-singular symbol: {0}")]
    Singular(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("insufficient decay: {0}")]
    Truncation(String),

    #[error("finite-difference stencil error: {0}")]
    Stencil(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, QthsError>;
