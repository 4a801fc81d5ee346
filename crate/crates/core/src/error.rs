use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty input sequence")]
    EmptySequence,

    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGradient { block: String },

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("day {day} has {len} samples, expected {expected}")]
    ShortTrajectory { day: u32, len: usize, expected: usize },

    #[error("unknown base station {0}")]
    UnknownStation(usize),

    #[error("state machine contract violated: {0}")]
    Contract(String),

    #[error("internal invariant violated at minute {minute}: {detail}")]
    Invariant { minute: usize, detail: String },

    #[error("{path}: line {line}: {detail}")]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
