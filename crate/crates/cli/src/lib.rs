//! Experiment driver for the rennala simulator: TOML configs, single runs,
//! seeded grid sweeps with CSV/SVG output, and the verification suites.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod plot;

pub use config::{ConfigError, ExperimentConfig, MethodSpec, Metric};
pub use error::CliError;
pub use experiment::{sweep, ConfigResult, RunKey, SweepResult};
