use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("pole proximity: {0}")]
    Pole(String),

    #[error("quadrature did not converge at {nodes} nodes per dimension: last {last:?}, previous {previous:?}")]
    Convergence {
        nodes: usize,
        last: (f64, f64),
        previous: (f64, f64),
    },

    #[error("truncation did not converge: {0}")]
    Truncation(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
