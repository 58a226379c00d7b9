use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Error, Debug)]
pub enum Error {
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("operation requires a linear drift (Nonlinearity::Linear)")]
    RequiresLinear,

    #[error("operation requires positive damping, got alpha = {0}")]
    RequiresDamping(f64),

    #[error("implicit step is not contractive: theta*dT*L_F = {0} >= 1")]
    ContractionViolation(f64),

    #[error("fixed-point solve did not converge after {maxit} iterations (last increment {increment:.3e})")]
    NonConvergence { maxit: usize, increment: f64 },

    #[error("index out of range: {name} = {index}, limit {limit}")]
    IndexOutOfRange {
        name: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid study parameters: {0}")]
    InvalidStudy(String),

    #[error("divergent: {0}")]
    Divergent(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("corrupt noise dump: {0}")]
    CorruptDump(String),
}

pub type Result<T> = std::result::Result<T, Error>;
