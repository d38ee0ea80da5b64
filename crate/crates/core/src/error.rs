use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the phasor pipeline.
#[derive(Debug, Error)]
pub enum VpcError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("degenerate amplitude on thread {thread}: modulus {modulus:e} below pull-back threshold")]
    DegenerateAmplitude { thread: usize, modulus: f64 },

    #[error("constant snapshot: standard deviation {std:e} too small to standardize")]
    ConstantSnapshot { std: f64 },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("tape does not match circuit: {0}")]
    TapeMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

impl VpcError {
    pub(crate) fn dim(context: &'static str, expected: usize, got: usize) -> Self {
        VpcError::Dimension {
            context,
            expected,
            got,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VpcError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = VpcError> = std::result::Result<T, E>;
