//! Result files: `results.json`, `timing.json` and CSV tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::CliError;

/// One summary statistic. `pass` is `None` for informational values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

impl Metric {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Metric {
            name: name.into(),
            value,
            tolerance: Some(tolerance),
            pass: Some(value <= tolerance),
        }
    }

    /// Passes when `value < bound`.
    pub fn below(name: &str, value: f64, bound: f64) -> Self {
        Metric {
            name: name.into(),
            value,
            tolerance: Some(bound),
            pass: Some(value < bound),
        }
    }

    /// A yes/no check, stored as 1 or 0.
    pub fn flag(name: &str, ok: bool) -> Self {
        Metric {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: None,
            pass: Some(ok),
        }
    }

    pub fn info(name: &str, value: f64) -> Self {
        Metric {
            name: name.into(),
            value,
            tolerance: None,
            pass: None,
        }
    }

    pub fn failed(&self) -> bool {
        self.pass == Some(false)
    }
}

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Table {
            file: file.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            for (i, v) in r.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                write!(s, "{v}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// What an experiment returns before anything is written.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub metrics: Vec<Metric>,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

/// Contents of `results.json`. Wall-clock time is not reproducible, so
/// `timing` names the sibling file that holds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub experiment: Experiment,
    pub parameters: ExperimentConfig,
    pub metrics: Vec<Metric>,
    pub timing: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub threads: usize,
}

pub const RESULTS_FILE: &str = "results.json";
pub const TIMING_FILE: &str = "timing.json";

impl Results {
    pub fn new(config: &ExperimentConfig, metrics: Vec<Metric>) -> Self {
        let pass = !metrics.iter().any(Metric::failed);
        Results {
            experiment: config.experiment,
            parameters: config.clone(),
            metrics,
            timing: TIMING_FILE.into(),
            pass,
        }
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

fn write(path: PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

/// Write every output file into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, results: &Results, tables: &[Table], timing: &Timing) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let json = serde_json::to_string_pretty(results).map_err(CliError::internal)?;
    write(dir.join(RESULTS_FILE), &(json + "\n"))?;
    let json = serde_json::to_string_pretty(timing).map_err(CliError::internal)?;
    write(dir.join(TIMING_FILE), &(json + "\n"))?;
    for t in tables {
        write(dir.join(&t.file), &t.to_csv())?;
    }
    Ok(())
}
