//! Admission experiments.
//!
//! A ramp submits batches of growing, steady, then shrinking size once per
//! interval; a spike submits every job at once. Each run gets a fresh
//! wall-clock cluster. Jobs run one short container and are deleted as soon
//! as they finish, so a job's record covers admission and deletion.
//! Runs with the VNI path enabled carry the `vni: "true"` annotation; the
//! baseline carries none.

mod config;
mod emit;
mod run;
pub mod stats;
mod summary;

pub use config::{Mode, RampConfig, SpikeConfig, Workload};
pub use emit::{emit, load_jobs_csv, load_timeline_csv, JOBS_CSV, SUMMARY_JSON, TIMELINE_CSV};
pub use run::{run_once, run_ramp, run_spike, sweep, BenchError, RunChecks, RunOptions, RunOutcome};
pub use summary::{BatchDelay, JobRow, Overall, Report, RunSummary, TimelinePoint, TimelineRow};
