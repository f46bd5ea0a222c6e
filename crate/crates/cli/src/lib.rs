//! Experiment front end for the `hpm-core` solvers: instance generation,
//! single runs, parameter sweeps and solver comparisons, all emitting CSV
//! traces and `key = value` metadata.

pub mod cli;
pub mod config;
pub mod error;
pub mod protocol;
pub mod trace;

pub use cli::cli_main;
pub use config::{ExperimentConfig, Protocol, SolverSpec};
pub use error::{CliError, Result};
pub use protocol::{run_protocol, SummaryRow};
pub use trace::{read_trace_csv, trace_rows, write_trace_csv, TraceRow};
