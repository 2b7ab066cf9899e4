//! Experiment driver: configuration, sweeps, persistence, fits, plots and
//! the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod export;
pub mod fit;
pub mod plot;
pub mod runner;

pub use config::{AlgorithmSpec, ExperimentConfig, InstanceSource, RegretSelection};
pub use fit::{fit_log_curve, LogFit};
pub use runner::{emit_plots, run_experiment, CriterionOutcome, ExperimentOutcome, ResultsManifest, RunOptions};
