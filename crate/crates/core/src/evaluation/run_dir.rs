//! Run directory layout:
//!
//! - `config.toml`: resolved configuration, written before training
//! - `report.csv`: one row per epoch
//! - `final_metrics.json`: test scores after training and at initialization
//! - `checkpoint.json` + `checkpoint.bin`: parameters and optimizer state
//! - `run.log`: timestamped progress lines
//!
//! Everything except `run.log` is a pure function of the config and data.

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::{records_csv, TrainConfig};

use super::experiments::RunResult;
use super::metrics::MetricPair;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub mse: f64,
    pub mape: f64,
    pub untrained_mse: f64,
    pub untrained_mape: f64,
}

impl FinalMetrics {
    pub fn new(trained: MetricPair, untrained: MetricPair) -> Self {
        FinalMetrics { mse: trained.mse, mape: trained.mape, untrained_mse: untrained.mse, untrained_mape: untrained.mape }
    }
}

#[derive(Debug, Clone)]
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    /// Creates the directory and writes `config.toml`.
    pub fn create(path: &Path, config: &TrainConfig) -> Result<RunDir> {
        fs::create_dir_all(path).map_err(Error::io(path))?;
        let dir = RunDir { path: path.to_path_buf() };
        dir.write("config.toml", &config.snapshot())?;
        Ok(dir)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path.join(name);
        fs::write(&p, text).map_err(Error::io(&p))
    }

    /// Appends `line` to `run.log`, prefixed with seconds since the epoch.
    pub fn log(&self, line: &str) -> Result<()> {
        let p = self.path.join("run.log");
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let mut f = OpenOptions::new().create(true).append(true).open(&p).map_err(Error::io(&p))?;
        writeln!(f, "[{now:.3}] {line}").map_err(Error::io(&p))
    }

    /// Writes the report, metrics and final checkpoint.
    pub fn write_results(&self, run: &RunResult) -> Result<()> {
        self.write("report.csv", &records_csv(run.session.records()))?;
        let metrics = FinalMetrics::new(run.metrics, run.untrained);
        let json = serde_json::to_string_pretty(&metrics).map_err(|e| Error::Checkpoint(e.to_string()))?;
        self.write("final_metrics.json", &(json + "\n"))?;
        run.session.save(&self.path, "checkpoint")
    }

    pub fn read_metrics(path: &Path) -> Result<FinalMetrics> {
        let p = path.join("final_metrics.json");
        let text = fs::read_to_string(&p).map_err(Error::io(&p))?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", p.display())))
    }
}
