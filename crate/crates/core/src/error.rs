use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error in {func}: {msg}")]
    Domain { func: &'static str, msg: String },

    #[error("{func}: result overflows f64")]
    Overflow { func: &'static str },

    #[error("{func}: result underflows f64")]
    Underflow { func: &'static str },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Mismatch(String),

    #[error("covariance factorization failed for mode {mode} (jitter {jitter:e} tried)")]
    Factorization { mode: usize, jitter: f64 },

    #[error("quadrature did not reach tolerance: estimated error {err:e} > {tol:e}")]
    Quadrature { err: f64, tol: f64 },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(func: &'static str, msg: impl Into<String>) -> Error {
    Error::Domain { func, msg: msg.into() }
}
