use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad or inconsistent input parameters.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    /// First-band states could not be identified cleanly.
    #[error("Wannier-Stark band identification failed: {0}")]
    Basis(String),

    /// NaN, overflow, or population leaking into the box edges.
    #[error("numerical failure at t = {time:.4}: {reason}")]
    Numerical { time: f64, reason: String },

    /// Perturbative formula evaluated outside its regime (strict mode only).
    #[error("validity regime violated: {0}")]
    Regime(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn numerical(time: f64, reason: impl Into<String>) -> Self {
        Error::Numerical {
            time,
            reason: reason.into(),
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code for the CLI: 2 config, 3 numerical, 4 regime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::Config { .. } => 2,
            Error::Regime(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
            Error::Basis(_) | Error::Numerical { .. } | Error::InsufficientData(_) => 3,
            Error::Io(_) => 1,
        }
    }
}
