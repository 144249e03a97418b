//! Experiment harness behind the `sacovest` binary: configuration, command
//! orchestration and report files.

mod commands;
mod config;
mod report;

pub use commands::{execute, list_problems};
pub use config::{
    config_from_flags, default_n_grid, load_config, load_config_str, CliOverrides, Command,
    Direction, ExperimentConfig, DEFAULT_LEVEL,
};
pub use report::{
    canonical_json, coverage_csv, emit_reports, emit_reports_to, fmt_f64, matrix_csv, rate_csv,
    trace_csv, RateRow, Reports, TraceRow,
};
