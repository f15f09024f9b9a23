use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument violated the precondition of an operation.
    #[error("domain error in {op}: {reason}")]
    Domain { op: &'static str, reason: String },

    /// A numerical routine failed to reach its target accuracy.
    #[error("numerical error in {op}: achieved tolerance {achieved:e}")]
    Numerical { op: &'static str, achieved: f64 },

    /// An exhaustive search would exceed its enumeration budget.
    #[error("budget exceeded in {op}: {size} > {budget}")]
    Budget { op: &'static str, size: u128, budget: u128 },

    /// Reading or writing an export failed.
    #[error("i/o error in {op}: {reason}")]
    Io { op: &'static str, reason: String },
}

impl Error {
    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            op,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(op: &'static str, err: impl std::fmt::Display) -> Self {
        Error::Io {
            op,
            reason: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
