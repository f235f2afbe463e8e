use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },

    #[error("mode {mode}: layer system is near-singular (condition estimate {cond:.3e})")]
    Singular { mode: u32, cond: f64 },

    #[error("mode {mode}: logarithm argument {value} is not positive")]
    NonPositiveLog { mode: u32, value: f64 },

    #[error("mode {mode}: unperturbed boundary intensity {value} is not positive")]
    NonPositiveIntensity { mode: u32, value: f64 },

    #[error("requested {requested} singular values but only {rank} exceed 1e-13 of the largest")]
    Rank { requested: usize, rank: usize },

    #[error("finite-difference oracle: {0}")]
    Oracle(String),

    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
