//! Experiment driver for the saddle-point solvers: config parsing, the
//! run pipeline, CSV/Markdown reports and rate-formula sweeps.

pub mod config;
pub mod experiment;
pub mod report;
pub mod sweep;

/// Overrides the output directory from the config (but not `--out`).
pub const OUT_DIR_ENV: &str = "SADDLE_OUT_DIR";
