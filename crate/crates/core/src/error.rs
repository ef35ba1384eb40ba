//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by graph construction, ranking, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// A data row could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A row carried a behavior label outside the declared set.
    #[error("unknown behavior label '{label}' at line {line}")]
    UnknownBehavior { label: String, line: usize },

    /// The input stream contained no data rows.
    #[error("empty input: no interaction rows found")]
    EmptyInput,

    /// A behavior sequence repeated a label.
    #[error("duplicate behavior '{0}' in sequence")]
    DuplicateBehavior(String),

    /// A requested behavior is not part of the log's declared set.
    #[error("behavior '{0}' not present in the interaction log")]
    MissingBehavior(String),

    /// Invalid ranking or evaluation configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Internal shape mismatch between vectors and graphs.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A dense-solver path was asked to handle a graph above its node cap.
    #[error("dense cap exceeded: {nodes} nodes > cap {cap}; the dense solver is a verification oracle, not the production path")]
    DenseCapExceeded { nodes: usize, cap: usize },

    /// Evaluation was requested but no user holds a test item.
    #[error("empty test set: no user has a held-out target interaction")]
    EmptyTestSet,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
