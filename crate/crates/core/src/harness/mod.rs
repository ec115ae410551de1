//! Experiment runner behind the command-line tool: training per fold,
//! single explanations, benchmark sweeps and independent verification.

mod benchmark;
mod config;
mod explain;
mod pipeline;
mod verify;

use std::path::PathBuf;

pub use benchmark::{benchmark_with, sample_users, summarize, write_report, CellMetrics, MetricsReport, QueryRecord};
pub use config::{Cell, ExperimentConfig, SampleSource, SpnModeConfig, ValidityKind, OUTPUT_DIR_ENV};
pub use explain::{explain_user_item, prepare_query, ChangedItemId, ExplainOutput, PreparedQuery};
pub use pipeline::{
    build_query, cmd_train, load_artifacts, prepare_data, recommend, Artifacts, PreparedData, Recommendation,
    TrainSummary,
};
pub use verify::{verify_ce, ValidityReport, SCORE_TOLERANCE};

use crate::error::Result;

/// Explains one recommendation using the trained artifacts.
pub fn cmd_explain(cfg: &ExperimentConfig, user_id: &str, item_id: &str) -> Result<ExplainOutput> {
    let art = load_artifacts(cfg)?;
    explain_user_item(cfg, &art, user_id, item_id)
}

/// Runs the benchmark and writes its CSV and JSON reports.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<(MetricsReport, PathBuf, PathBuf)> {
    let art = load_artifacts(cfg)?;
    let report = benchmark_with(cfg, &art)?;
    let (csv, json) = write_report(&report, &cfg.resolved_output_dir())?;
    Ok((report, csv, json))
}
