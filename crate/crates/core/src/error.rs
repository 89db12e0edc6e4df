use std::path::PathBuf;

use thiserror::Error;

use crate::autodiff::AutodiffError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),

    #[error("latent dimension mismatch: model expects {expected}, got {got}")]
    LatentDim { expected: usize, got: usize },

    #[error("coupling layer {layer}: {source}")]
    Bijector {
        layer: usize,
        #[source]
        source: AutodiffError,
    },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("diffusion step {t} outside 0..={steps}")]
    DiffusionStep { t: usize, steps: usize },

    #[error("non-finite loss at step {step} (field term {field}, kl term {kl})")]
    NonFiniteLoss { step: usize, field: f64, kl: f64 },

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
