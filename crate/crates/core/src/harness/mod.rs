//! Experiment orchestration: methods under a shared budget, repeated
//! seeded runs, persisted artifacts and statistical reports.

mod config;
mod report;
mod run;

pub use config::{ExperimentConfig, Method, Step2Unit};
pub use report::{
    collect_results, curves_csv, emit_report, pairwise_stats, summarize_results, MethodSummary, METRICS,
};
pub use run::{
    persist_run, resolve_sut, run_method, run_pipeline, seed_dir, unique_indices, write_atomic, write_json, Manifest,
    RunArtifacts, RunResult,
};
