use thiserror::Error;

/// Errors produced by the numeric core and the experiment engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {0} out of range (spectral indices start at 1)")]
    IndexOutOfRange(usize),

    #[error("point {0} lies outside the domain [0, 1]")]
    OutOfDomain(f64),

    #[error("unsupported smoothness order {0}")]
    UnsupportedOrder(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular matrix detected at pivot {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rejection sampler stalled after {proposals} proposals for point {index}")]
    SamplerStall { index: usize, proposals: u64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("statistical verification failed: {0}")]
    StatisticalFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
