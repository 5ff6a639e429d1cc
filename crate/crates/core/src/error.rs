use std::io;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("{name} is out of range: {msg}")]
    OutOfRange { name: &'static str, msg: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate direction (norm {norm:e})")]
    DegenerateDirection { norm: f64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("objective does not expose a gradient")]
    MissingGradient,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid label {label} (expected -1 or +1)")]
    InvalidLabel { label: f64 },

    #[error("plugin buffers are not initialized for dimension {dim}")]
    UninitializedBuffers { dim: usize },

    #[error("config: {key}: {msg}")]
    Config { key: String, msg: String },

    #[error("budget of {budget} oracle calls is smaller than one iteration ({per_iter})")]
    BudgetTooSmall { budget: u64, per_iter: u64 },

    #[error("budget mismatch: {0}")]
    BudgetMismatch(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
