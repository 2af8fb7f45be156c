//! Grid execution, multi-run averaging and run manifests.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::pipeline::{run_config_with, EvalResult, ResourceFile, Resources};
use crate::corpus::LabeledDataset;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub key: String,
    pub outcome: std::result::Result<EvalResult, String>,
}

impl GridRow {
    pub fn result(&self) -> Option<&EvalResult> {
        self.outcome.as_ref().ok()
    }
}

/// Successful rows by F1 descending then config key; failed rows last.
pub fn sort_rows(rows: &mut [GridRow]) {
    rows.sort_by(|a, b| match (&a.outcome, &b.outcome) {
        (Ok(x), Ok(y)) => y.metrics.f1_positive.total_cmp(&x.metrics.f1_positive).then_with(|| a.key.cmp(&b.key)),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        (Err(_), Err(_)) => a.key.cmp(&b.key),
    });
}

/// Runs every config, `jobs` at a time. A failing config becomes a failed
/// row; the grid always completes.
pub fn run_grid(
    configs: &[PipelineConfig],
    train: &LabeledDataset,
    test: &LabeledDataset,
    res: &Resources,
    jobs: usize,
) -> Vec<GridRow> {
    let exec = if jobs > 1 { Execution::Parallel } else { Execution::Sequential };
    let mut rows = par::with_workers(jobs, || {
        par::map(configs, exec, |cfg| {
            let key = cfg.to_flat();
            let outcome = run_config_with(cfg, train, test, res, exec).map_err(|e| e.to_string());
            match &outcome {
                Ok(r) => log::info!("f1={:.4} {key}", r.metrics.f1_positive),
                Err(e) => log::warn!("failed: {key}: {e}"),
            }
            GridRow { key, outcome }
        })
    });
    sort_rows(&mut rows);
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub runs: Vec<f64>,
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub stdev: f64,
}

impl RunStats {
    pub fn from_values(runs: Vec<f64>) -> Result<Self> {
        if runs.len() < 2 {
            return Err(Error::invalid("averaging needs at least 2 runs"));
        }
        let n = runs.len() as f64;
        let mean = runs.iter().sum::<f64>() / n;
        let var = runs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        Ok(RunStats {
            mean,
            max: runs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: runs.iter().copied().fold(f64::INFINITY, f64::min),
            stdev: var.sqrt(),
            runs,
        })
    }
}

/// Calls `runner` with seeds `seed, seed+1, ..` and summarizes the F1s.
pub fn average_runs_with<F>(n: usize, seed: u64, mut runner: F) -> Result<RunStats>
where
    F: FnMut(u64) -> Result<f64>,
{
    if n < 2 {
        return Err(Error::invalid("averaging needs at least 2 runs"));
    }
    let runs = (0..n as u64).map(|i| runner(seed + i)).collect::<Result<Vec<_>>>()?;
    RunStats::from_values(runs)
}

pub fn average_runs(
    cfg: &PipelineConfig,
    n: usize,
    train: &LabeledDataset,
    test: &LabeledDataset,
    res: &Resources,
) -> Result<RunStats> {
    average_runs_with(n, cfg.seed, |seed| {
        let c = PipelineConfig { seed, ..cfg.clone() };
        Ok(run_config_with(&c, train, test, res, Execution::default())?.metrics.f1_positive)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub config: String,
    pub seed: u64,
    pub status: String,
    pub f1_positive: Option<f64>,
    pub wall_time: Option<f64>,
}

/// Provenance record written next to every sweep's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub source: String,
    pub seed: u64,
    pub jobs: usize,
    pub train: ResourceFile,
    pub test: ResourceFile,
    pub resources: Vec<ResourceFile>,
    pub rows: Vec<ManifestRow>,
    pub wall_time: f64,
}

impl Manifest {
    pub fn rows_from(rows: &[GridRow], configs: &[PipelineConfig]) -> Vec<ManifestRow> {
        rows.iter()
            .map(|r| {
                let seed = configs.iter().find(|c| c.to_flat() == r.key).map_or(0, |c| c.seed);
                match &r.outcome {
                    Ok(e) => ManifestRow {
                        config: r.key.clone(),
                        seed,
                        status: "ok".into(),
                        f1_positive: Some(e.metrics.f1_positive),
                        wall_time: Some(e.wall_time),
                    },
                    Err(msg) => ManifestRow {
                        config: r.key.clone(),
                        seed,
                        status: format!("failed: {msg}"),
                        f1_positive: None,
                        wall_time: None,
                    },
                }
            })
            .collect()
    }
}

/// Wall-clock helper for callers assembling a manifest.
pub fn timed<R>(f: impl FnOnce() -> R) -> (R, f64) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed().as_secs_f64())
}
