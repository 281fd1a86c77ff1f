use thiserror::Error;

/// Errors raised by grid construction, the solvers and scenario handling.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("zero pivot in tridiagonal solve at row {0}")]
    ZeroPivot(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid scenario field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("missing: {0}")]
    Missing(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for FlowError {
    fn from(err: std::io::Error) -> Self {
        FlowError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FlowError>;
