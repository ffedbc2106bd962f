use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("syntax error on line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("predicate `{pred}` used with arity {found}, expected {expected}")]
    Arity { pred: String, expected: usize, found: usize },
    #[error("query is not a ditree: {0}")]
    NotDitree(String),
    #[error("query is not a 1-CQ: {0}")]
    NotOneCq(String),
    #[error("unsupported query shape: {0}")]
    Shape(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    /// Exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CapExceeded(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
