use thiserror::Error;

/// Failures surfaced by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("{what} did not converge after {iterations} iterations (best residual {residual:e})")]
    NoConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("iteration diverged after {iterations} iterations (residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Contract(_)
                | Error::InvalidKernel(_)
                | Error::Resource(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
