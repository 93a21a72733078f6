use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("support state index {index} out of range (num_support = {num_support})")]
    IndexOutOfRange { index: usize, num_support: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive definite (failed at block {block})")]
    NotPositiveDefinite { block: usize },

    #[error("metric factorization failed; minimum eigenvalue {min_eigenvalue:e}")]
    MetricFactorization { min_eigenvalue: f64 },

    #[error("degenerate particle set: every log-weight is -inf")]
    DegenerateWeights,

    #[error("iteration {iter}: {source}")]
    Iteration {
        iter: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_iteration(self, iter: usize) -> Self {
        Error::Iteration {
            iter,
            source: Box::new(self),
        }
    }
}
