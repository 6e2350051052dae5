//! Seeded Monte Carlo harness around the `momvc` estimators.
//!
//! An [`ExperimentConfig`] describes one generator, one adversary and one
//! estimator swept over a grid of `(n, d, s, k, epsilon)` cells. The runner
//! records one loss per replicate and the writers in [`output`] turn the
//! result into a quantile table and a deviation plot.

pub mod config;
pub mod demo;
pub mod output;
pub mod runner;

use std::path::Path;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use output::{emit_outputs, write_csv, write_svg, OutputFormat, CSV_HEADER};
pub use runner::{run_experiment, CellResult, ExperimentResult, ReplicateRecord};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl BenchError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit code: 1 for configuration problems, 2 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Io { .. } => 2,
        }
    }
}

impl From<momvc::MomError> for BenchError {
    fn from(e: momvc::MomError) -> Self {
        match e {
            momvc::MomError::Io { path, source } => Self::Io { path, source },
            other => Self::Config(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
