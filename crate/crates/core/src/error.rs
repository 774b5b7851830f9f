use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library and the `pfx` command.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside the declared domain: {0}")]
    Domain(String),

    #[error("exact distance D - P = {value} is negative (D = {d}, P = {p})")]
    NegativeExactDistance { d: f64, p: f64, value: f64 },

    #[error("base distances differ at a sampled pair ({x}, {y}): {left} vs {right}")]
    MismatchedBase { x: f64, y: f64, left: f64, right: f64 },

    #[error("scale factor must be positive, got {0}")]
    InvalidScale(f64),

    #[error("gauge argument must be positive, got {0}")]
    NonPositiveArgument(f64),

    #[error("every sampled pair has D(Tx, Ty) below the zero threshold")]
    NoEligiblePairs,

    #[error("iterate left the domain at step {step}")]
    OverflowGuard { step: usize },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("non-finite value {value} at node {node}")]
    NonFiniteValue { node: usize, value: f64 },

    #[error("shape mismatch: {left} vs {right} nodes")]
    ShapeMismatch { left: usize, right: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("{func} undefined at {arg}")]
    EvalDomain { func: &'static str, arg: f64 },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("gauge `{id}` failed its audit ({violations} violations)")]
    GaugeRejected { id: String, violations: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
