//! Experiment runner: corpus generation, training, evaluation, sweeps and
//! timing reports driven by one TOML config.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{cmd_eval, cmd_gen, cmd_sweep, cmd_timing, cmd_train};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
