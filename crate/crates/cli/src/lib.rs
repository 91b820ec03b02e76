//! Experiment harness around `hippa-core`: configuration parsing with
//! CLI-over-file-over-default precedence, deterministic experiment runs that
//! emit per-method CSV traces plus a certificate-carrying summary JSON, and
//! long-format plot data.

pub mod config;
pub mod experiment;
pub mod plotdata;

pub use config::{parse_config_file, parse_methods, Budget, ExperimentConfig, Method, PartialConfig};
pub use experiment::{
    run_experiment, trace_csv, write_atomic, ExperimentSummary, HarnessError, MethodSummary,
    TraceRow, RESIDUAL_TOL, VIRTUAL_SECONDS_PER_CALL,
};
pub use plotdata::emit_plot_data;
