//! Experiment harness: configuration files, built-in experiments, sweeps and summaries.

pub mod config;
pub mod error;
pub mod problem;
pub mod run;
pub mod summary;
pub mod sweep;

pub use config::{builtin, load_config, resolve, ExperimentConfig, BUILTINS};
pub use error::CliError;
pub use run::{run_experiment, RunRecord};
pub use summary::emit_summary;
pub use sweep::{run_sweep, Axis, SweepReport};
