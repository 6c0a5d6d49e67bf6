//! Experiment runner for multipoint perturbation theory on the periodic
//! Schrödinger model: convergence sweeps, the `alpha` heatmap, symbolic
//! cost tables and log-log slope fits.

pub mod complexity;
pub mod config;
pub mod experiments;
pub mod records;
pub mod slope;
pub mod verify;

use thiserror::Error;

pub use config::BenchConfig;
pub use experiments::{run_convergence, run_heatmap, ConvergenceKind, Model};
pub use records::{write_csv, ExperimentRecord};
pub use slope::fit_slope;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] multipoint_core::Error),

    #[error("configuration: {0}")]
    Config(String),

    #[error("slope fit needs at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("log-log data too noisy for a slope (rms residual {0:.3} decades)")]
    NoisyData(f64),

    #[error("cannot parse cost expression '{0}'")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
