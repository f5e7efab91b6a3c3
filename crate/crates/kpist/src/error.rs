use thiserror::Error;

/// Errors raised by the solver stages. The CLI maps these onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{stage} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("{stage} diverged: {detail}")]
    Divergence { stage: &'static str, detail: String },
    #[error("format error: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
