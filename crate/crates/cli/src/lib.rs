//! Configuration, task dispatch and repro suites behind the `mmsgeo` binary.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod suites;
pub mod tasks;

use std::path::{Path, PathBuf};
use std::time::Instant;

use mmsgeo::par;
use mmsgeo::report::{Report, Verdict};
use mmsgeo::GeoError;
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 3 for bad input, 4 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Geo(GeoError::InvalidParameter { .. }) | CliError::Geo(GeoError::Table(_)) => 3,
            CliError::Geo(_) | CliError::Io(_) => 4,
        }
    }
}

/// Everything needed to reproduce and audit one run, written as `run.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub version: &'static str,
    pub parallel: bool,
    pub workers: Option<usize>,
    pub wall_time_s: f64,
    pub verdicts: Vec<Verdict>,
    pub artifacts: Vec<PathBuf>,
    pub passed: bool,
}

/// Validates `cfg`, runs it and writes the report and `run.json` under `out`.
/// Nothing is written when the configuration is rejected.
pub fn run(cfg: &ExperimentConfig, out: &Path, workers: Option<usize>) -> Result<RunRecord, CliError> {
    cfg.params.validate()?;
    let start = Instant::now();
    let report = par::with_workers(workers, || tasks::execute(cfg))?;
    write_record(cfg, &report, out, workers, start.elapsed().as_secs_f64())
}

pub(crate) fn write_record(
    cfg: &ExperimentConfig,
    report: &Report,
    out: &Path,
    workers: Option<usize>,
    wall_time_s: f64,
) -> Result<RunRecord, CliError> {
    let mut artifacts = report.write_to(out, cfg.task.name())?;
    let run_path = out.join("run.json");
    artifacts.push(run_path.clone());
    let record = RunRecord {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION"),
        parallel: par::is_parallel(),
        workers,
        wall_time_s,
        verdicts: report.verdicts.clone(),
        artifacts,
        passed: report.passed(),
    };
    std::fs::write(&run_path, serde_json::to_string_pretty(&record).expect("record serializes") + "\n")?;
    Ok(record)
}
