//! Experiment harness: configuration, per-seed runs, and result files.

pub mod config;
pub mod emit;
pub mod experiment;

pub use config::{parse_seeds, ConfigError, ExperimentConfig, Method};
pub use emit::{aggregate_rows, emit_results, load_record, seed_rows, AggregateRow, OutputFormat, SeedRow};
pub use experiment::{
    build_curve, checkpoints, run_experiment, run_seed, AcceptanceStats, CurvePoint, HarnessError, RunRecord, SeedRun,
};
