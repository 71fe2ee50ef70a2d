use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("process is not stable (spectral radius {radius:.6})")]
    Unstable { radius: f64 },

    #[error("eigenvalue solver did not converge")]
    EigenSolver,

    #[error("retry budget exhausted after {attempts} attempts: {what}")]
    RetryExhausted { attempts: usize, what: String },

    #[error("non-finite value in sampler step `{step}`: {detail}")]
    NonFinite { step: &'static str, detail: String },

    #[error("cannot prune `{0}` to rank zero")]
    RankZero(String),
}
