use thiserror::Error;

/// Errors produced by the mrw library.
#[derive(Debug, Error)]
pub enum MrwError {
    /// A model parameter violates its domain (e.g. `sigma <= 0`, `H` outside (0,1)).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A covariance sequence was rejected as non positive definite: the
    /// Durbin-Levinson or Cholesky pivot at `order` came out nonpositive.
    #[error("covariance not positive definite at order {order} (pivot {pivot:.6e})")]
    NotPositiveDefinite { order: usize, pivot: f64 },

    /// An input series or argument fails a precondition (too short, wrong
    /// length, empty scale range, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An input file row could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no records: {0}")]
    NoData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, MrwError>;
