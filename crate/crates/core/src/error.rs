use std::fmt;

use thiserror::Error;

/// Errors raised by the pricing library and the command-line front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("coefficient {name} evaluates to {value} at s = {at}")]
    Coefficient { name: String, at: f64, value: f64 },

    #[error("integrand is not finite ({value}) at node {node:?}")]
    Evaluation { node: Vec<f64>, value: f64 },

    #[error("{what} = {requested} exceeds the configured cap {cap}")]
    Capacity {
        what: &'static str,
        requested: u64,
        cap: u64,
    },

    #[error("quadrature needs {requested} integrand evaluations, over the budget of {budget}")]
    Budget { requested: u64, budget: u64 },

    #[error(
        "series left its convergence domain: A0 = {a0} (tail bound {tail_bound}); \
         shorten the window or raise the truncation order"
    )]
    SeriesDivergence { a0: f64, tail_bound: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Expression(#[from] ExprError),
}

/// Configuration failures. Each kind has its own code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },

    #[error("{field}: {message}")]
    Invalid { field: String, message: String },

    #[error("constraint violated: {constraint}")]
    Constraint { constraint: String },

    #[error("{0}")]
    Io(String),
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Syntax { .. } => "E_SYNTAX",
            ConfigError::UnknownKey { .. } => "E_UNKNOWN_KEY",
            ConfigError::DuplicateKey { .. } => "E_DUPLICATE_KEY",
            ConfigError::Invalid { .. } => "E_INVALID_VALUE",
            ConfigError::Constraint { .. } => "E_CONSTRAINT",
            ConfigError::Io(_) => "E_IO",
        }
    }
}

/// Expression parse failure with the byte offset of the offending token.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("unexpected {found} at offset {offset}, expected {expected}")]
    UnexpectedToken {
        offset: usize,
        found: TokenDesc,
        expected: &'static str,
    },

    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { offset: usize, name: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },

    #[error("malformed number `{text}` at offset {offset}")]
    BadNumber { offset: usize, text: String },
}

impl ExprError {
    pub fn offset(&self) -> usize {
        match self {
            ExprError::UnexpectedToken { offset, .. }
            | ExprError::UnknownFunction { offset, .. }
            | ExprError::UnknownIdentifier { offset, .. }
            | ExprError::BadNumber { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenDesc {
    End,
    Char(char),
    Text(String),
}

impl fmt::Display for TokenDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenDesc::End => write!(f, "end of input"),
            TokenDesc::Char(c) => write!(f, "`{c}`"),
            TokenDesc::Text(s) => write!(f, "`{s}`"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
