//! Experiment harness for the Ritz-Uzawa solvers: run configuration, CSV and
//! JSON artifacts, iterate persistence and a finite-difference reference.

pub mod artifacts;
pub mod experiment;
pub mod reference;
pub mod state;

pub use experiment::{run_experiment, Experiment, ExperimentConfig, PhaseOverride, RunReport};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] runn_core::error::Error),
}

impl Error {
    /// Process exit code: 2 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Core(runn_core::error::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}
