use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("undeclared type {0}")]
    UndeclaredType(String),

    #[error("duplicate production {0}")]
    DuplicateProduction(String),

    #[error("invalid grammar: {0}")]
    Grammar(String),

    #[error("invalid transitions: {0}")]
    Transitions(String),

    #[error("unknown production {0}")]
    UnknownProduction(String),

    /// No production and no terminal can fill a slot.
    #[error("empty distribution for type {ty} under {parent}")]
    EmptySupport { parent: String, ty: String },

    #[error("type error at node {path:?}: {message}")]
    Type { path: Vec<usize>, message: String },

    #[error("unknown column {0}")]
    UnknownColumn(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
