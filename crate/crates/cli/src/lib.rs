//! Reproducible experiment runner for `mollify-core`.
//!
//! A run reads an [`ExperimentConfig`], executes the named experiment with
//! replicas spread over a thread pool, and writes `results.json`,
//! `timing.json` and CSV tables. Replica seeds depend only on the master
//! seed and the replica index, and all merging happens in index order, so
//! every file except `timing.json` is byte-identical across runs and
//! thread counts.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

use std::time::Instant;

pub use config::{Experiment, ExperimentConfig, GridConfig, Tolerances};
pub use error::{exit, CliError};
pub use report::{Metric, Outcome, Results, Table, Timing};

/// A finished run: results plus the tables that were written.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub results: Results,
    pub tables: Vec<Table>,
    pub timing: Timing,
}

/// Run `config` on a pool of `threads` workers (0 = rayon's default) and
/// return the results without writing anything.
pub fn run_in_memory(config: &ExperimentConfig, threads: usize) -> Result<RunReport, CliError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(CliError::internal)?;
    let start = Instant::now();
    let outcome = pool.install(|| experiments::execute(config))?;
    let timing = Timing {
        wall_seconds: start.elapsed().as_secs_f64(),
        threads: pool.current_num_threads(),
    };
    Ok(RunReport {
        results: Results::new(config, outcome.metrics),
        tables: outcome.tables,
        timing,
    })
}

/// Run and write every output file into `config.output_dir`.
pub fn run(config: &ExperimentConfig, threads: usize) -> Result<RunReport, CliError> {
    let report = run_in_memory(config, threads)?;
    report::write_outputs(&config.output_dir, &report.results, &report.tables, &report.timing)?;
    Ok(report)
}

/// One line per experiment: name and description.
pub fn list_text() -> String {
    let width = Experiment::ALL.iter().map(|e| e.name().len()).max().unwrap_or(0);
    Experiment::ALL
        .iter()
        .map(|e| format!("{:width$}  {}\n", e.name(), e.description()))
        .collect()
}

pub fn list_json() -> String {
    let items: Vec<serde_json::Value> = Experiment::ALL
        .iter()
        .map(|e| serde_json::json!({"name": e.name(), "description": e.description()}))
        .collect();
    serde_json::to_string_pretty(&items).expect("plain strings") + "\n"
}
