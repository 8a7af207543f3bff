use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("loss node is not a scalar (shape {0:?})")]
    NotScalar((usize, usize)),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: duplicate belief ({concept}, {property}), first seen on line {first_line}")]
    DuplicateBelief {
        line: usize,
        first_line: usize,
        concept: String,
        property: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("{kind} id {id} out of range (count {count})")]
    OutOfRange {
        kind: &'static str,
        id: usize,
        count: usize,
    },
    #[error("name collision: {0:?} is already used")]
    NameCollision(String),
    #[error("numerical divergence in {stage} at {at}")]
    Divergence { stage: &'static str, at: usize },
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),
    #[error("digest mismatch: expected {expected}, found {found}")]
    DigestMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors caused by numerical blow-up rather than bad input.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::NonFinite(_))
    }
}
