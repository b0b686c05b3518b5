use thiserror::Error;

/// Errors raised by the closure library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("adaptive quadrature did not converge (estimate {estimate:e}, error {error:e})")]
    Quadrature { estimate: f64, error: f64 },

    #[error("pathological closure state: support polynomial is nowhere positive")]
    Pathological,

    #[error("moment vector is not realizable: {0}")]
    NotRealizable(String),

    #[error("closure order {order} with basis size {basis} exceeds the supported envelope")]
    Envelope { order: u32, basis: usize },

    #[error("Newton projection did not converge after {iterations} iterations (relative update {rel_update:e})")]
    NotConverged { iterations: usize, rel_update: f64 },

    #[error("projection failed at level {level} (basis size {basis}): {source}")]
    Level {
        level: usize,
        basis: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("matrix is not symmetric positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
