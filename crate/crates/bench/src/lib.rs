//! Experiment runner for the tensor methods: configuration parsing, trace
//! and summary files, replay of the explicit complexity bounds against
//! recorded runs, empirical rate estimation and the lower-bound rate caps.

pub mod config;
pub mod experiment;
pub mod lower_bound;
pub mod replay;
pub mod slope;
pub mod trace_io;

use thiserror::Error;

use tensormin::schemes::RunTrace;

pub use config::{parse_composite, parse_instance, ConfigError, ExperimentConfig, SchemeName, StartPoint};
pub use experiment::{run_batch, run_experiment, run_scheme, ExperimentOutput, RunOutcome, Summary, SCHEMA_VERSION};
pub use lower_bound::{lower_bound_evaluate, LowerBoundMode};
pub use replay::{replay_bounds, AccelRow, BoundReport, BoundStatus, BoundTag, ReplayContext};
pub use slope::slope_estimate;
pub use trace_io::{read_trace_csv, write_trace_csv, TraceIoError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run failed: {message}")]
    Runtime {
        message: String,
        /// Trace recorded up to the failure.
        partial: Option<Box<RunTrace>>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Trace(#[from] TraceIoError),
    #[error("summary: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// Process exit code: 1 for configuration errors, 2 for runtime
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 1,
            _ => 2,
        }
    }
}
