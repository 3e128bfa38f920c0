use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data (wrong shape, non-finite or non-positive values).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A parameter outside its admissible domain.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// A numerical operation failed (singular matrix, non-finite result).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An operation refused because its cost guard was exceeded.
    #[error("refused: {0}")]
    Refused(String),

    /// A fit aborted, e.g. because too many iterations produced non-finite
    /// gradients.
    #[error("fit aborted: {0}")]
    FitAborted(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
