//! Model-side error type; wraps the data-side errors and tensor failures.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] lumiforge_core::Error),

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("non-finite loss at step {step}: {detail}")]
    NanLoss { step: usize, detail: String },

    #[error("timestep {t} outside [1, {t_train}]")]
    TimestepOutOfRange { t: usize, t_train: usize },

    #[error("incompatible shapes: {0}")]
    Incompatible(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
