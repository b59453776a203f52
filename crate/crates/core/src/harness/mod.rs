//! Monte Carlo experiment harness: configuration, execution, reporting.

pub mod checks;
pub mod config;
pub mod experiment;
pub mod report;
pub mod stats;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, run_experiment_with_threads};
pub use report::{emit_csv, CoverageReport};
