use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("distribution has empty support")]
    EmptySupport,
    #[error("probability masses must be non-negative and sum to 1, got total {0}")]
    BadMass(String),
    #[error("slot {slot} out of range 1..={len}")]
    BadSlot { slot: usize, len: usize },
    #[error("algorithm has no row for profile {0}")]
    IncompleteAlgorithm(String),
    #[error("outcome range is empty")]
    EmptyRange,
    #[error("weight matrix is not square ({rows} rows, row {row} has {cols} columns)")]
    NonSquare { rows: usize, row: usize, cols: usize },
    #[error("exact enumeration needs {needed} entries, budget is {budget}; rerun with --mode mc")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("parse error at `{key}`: {msg}")]
    Parse { key: String, msg: String },
    #[error("validation error at `{key}`: {msg}")]
    Validation { key: String, msg: String },
    #[error("{0}")]
    Config(String),
}

impl Error {
    pub(crate) fn validation(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn parse(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            key: key.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
