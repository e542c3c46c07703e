use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum MsrkError {
    #[error("invalid method: {0}")]
    InvalidMethod(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("history holds {found} steps, method needs {expected}")]
    History { expected: usize, found: usize },
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error(
        "accuracy certificate failed: step-halving difference {difference:e} exceeds {tolerance:e}"
    )]
    Accuracy { difference: f64, tolerance: f64 },
    #[error("no feasible method found for (s,k,p) = ({s},{k},{p}): {reason}")]
    Infeasible {
        s: usize,
        k: usize,
        p: usize,
        reason: String,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = MsrkError> = std::result::Result<T, E>;
