//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("insufficient data: {what}: need {required}, have {available}")]
    InsufficientData {
        what: String,
        required: usize,
        available: usize,
    },

    #[error("degenerate asset {asset}: zero weighted return variance")]
    DegenerateAsset { asset: String },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("infeasible selection: {0}")]
    Feasibility(String),

    #[error("illegal move: {0}")]
    Move(String),

    #[error("instance too large for exact enumeration: {combinations} feasible selections exceed {limit}")]
    Capacity { combinations: u128, limit: u128 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("range error: {what}: need {required}, have {available}")]
    Range {
        what: String,
        required: usize,
        available: usize,
    },

    #[error("insufficient sample for {test}: need {required}, have {actual}")]
    InsufficientSample {
        test: String,
        required: usize,
        actual: usize,
    },

    #[error("stage {stage} failed: {cause}")]
    Stage { stage: usize, cause: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
