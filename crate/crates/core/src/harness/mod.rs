//! Experiment configuration, the round-robin runner, metric traces and
//! their CSV/JSON emission.

mod config;
mod run;
mod sweep;
mod trace;

pub use config::{Algorithm, AlphaConfig, ApproxConfig, EnvironmentConfig, ExperimentConfig};
pub use run::{build_env, build_policy, run, run_replicate, RunOutput};
pub use sweep::{summary_csv, sweep, SweepGrid, SweepRow, SUMMARY_HEADER};
pub use trace::{emit, MetricsTrace, OutputFormat, StepRecord, SyncRecord, CSV_HEADER};
