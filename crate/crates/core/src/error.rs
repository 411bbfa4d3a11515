use std::io;

use thiserror::Error;

/// Errors raised anywhere in the key generation pipeline.
///
/// The variants group failures by who has to fix them: a bad parameter
/// (`Config`), bad input data (`Data`, `Format`), or a statistical
/// condition the pipeline cannot satisfy (`Estimation`, `CannotAmplify`).
#[derive(Debug, Error)]
pub enum SkgError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("estimation error: need at least {required} samples, got {available}")]
    Estimation { required: usize, available: usize },

    #[error("cannot amplify: {0}")]
    CannotAmplify(String),

    #[error("test not applicable: {test} needs at least {min_len} bits, got {len}")]
    NotApplicable {
        test: &'static str,
        min_len: usize,
        len: usize,
    },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl SkgError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        SkgError::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        SkgError::Data(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        SkgError::Format(msg.into())
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            SkgError::Config(_) => 2,
            SkgError::Data(_)
            | SkgError::Format(_)
            | SkgError::Estimation { .. }
            | SkgError::CannotAmplify(_)
            | SkgError::NotApplicable { .. }
            | SkgError::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, SkgError>;
