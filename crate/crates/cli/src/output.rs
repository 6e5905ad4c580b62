//! Output directory, run manifest and the CSV/NDJSON row formats.

use crate::config::{MapSource, RunConfig};
use anyhow::{Context, Result};
use pursuit_core::experiments::{BudgetPairSummary, BudgetSeries, DetectionTable};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Bumped whenever a CSV layout changes.
pub const CSV_SCHEMAS: &[(&str, u32)] = &[
    ("budget_stats.csv", 1),
    ("budget_summary.csv", 1),
    ("detection_table.csv", 1),
];

#[derive(Debug, Serialize)]
pub struct MapInfo {
    pub id: String,
    pub source: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub map: MapInfo,
    pub config: RunConfig,
    pub csv_schemas: BTreeMap<&'static str, u32>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, source: &MapSource, config: &RunConfig, outputs: Vec<String>) -> Self {
        Self {
            tool: "pursuit",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            map: MapInfo {
                id: source.id().to_string(),
                source: source.describe(),
                sha256: source.sha256(),
            },
            config: config.clone(),
            csv_schemas: CSV_SCHEMAS.iter().copied().collect(),
            outputs,
        }
    }
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_manifest(&self, manifest: &Manifest) -> Result<()> {
        let mut text = serde_json::to_string_pretty(manifest)?;
        text.push('\n');
        self.write("manifest.json", text.as_bytes())
    }

    pub fn write_ndjson<'a, T: Serialize + 'a>(&self, name: &str, items: impl Iterator<Item = &'a T>) -> Result<()> {
        let path = self.path(name);
        let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        let mut w = BufWriter::new(file);
        for item in items {
            serde_json::to_writer(&mut w, item)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv<R: Serialize>(&self, name: &str, rows: Vec<R>) -> Result<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionCsvRow {
    pub chaser_kind: String,
    pub runner_kind: String,
    pub restarts: usize,
    pub detections: usize,
    pub rate: f64,
}

pub fn detection_rows(table: &DetectionTable) -> Vec<DetectionCsvRow> {
    table
        .rows
        .iter()
        .map(|r| DetectionCsvRow {
            chaser_kind: r.chaser_kind.to_string(),
            runner_kind: r.runner_kind.to_string(),
            restarts: r.restarts,
            detections: r.detections,
            rate: r.rate,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetCsvRow {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub restart: usize,
    pub t: usize,
    pub log_z_chaser: f64,
    pub log_z_runner: f64,
    pub ess: f64,
    pub ess_fraction: f64,
    pub w_min: f64,
    pub w_q25: f64,
    pub w_median: f64,
    pub w_q75: f64,
    pub w_max: f64,
}

pub fn budget_rows(series: &[BudgetSeries]) -> Vec<BudgetCsvRow> {
    series
        .iter()
        .flat_map(|s| {
            s.stats.iter().map(move |st| {
                let q = &st.log_weight_quantiles;
                BudgetCsvRow {
                    k: s.particles,
                    l: s.runner_samples,
                    restart: s.restart,
                    t: st.t,
                    log_z_chaser: st.log_z_chaser,
                    log_z_runner: st.log_z_runner,
                    ess: st.ess,
                    ess_fraction: st.ess_fraction,
                    w_min: q.min,
                    w_q25: q.q25,
                    w_median: q.median,
                    w_q75: q.q75,
                    w_max: q.max,
                }
            })
        })
        .collect()
}

/// Restart means per pair and step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCsvRow {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub t: usize,
    pub restarts: usize,
    pub log_z_chaser: f64,
    pub log_z_runner: f64,
    pub ess_fraction: f64,
}

pub fn summary_rows(summaries: &[BudgetPairSummary]) -> Vec<SummaryCsvRow> {
    summaries
        .iter()
        .flat_map(|s| {
            s.per_step.iter().map(move |r| SummaryCsvRow {
                k: s.particles,
                l: s.runner_samples,
                t: r.t,
                restarts: r.restarts,
                log_z_chaser: r.log_z_chaser,
                log_z_runner: r.log_z_runner,
                ess_fraction: r.ess_fraction,
            })
        })
        .collect()
}

/// Raw `K x L` weight grid of one step of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightLine {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub restart: usize,
    pub t: usize,
    pub chaser_factors: Vec<f64>,
    pub runner_weights: Vec<f64>,
}

pub fn weight_lines(series: &[BudgetSeries]) -> Vec<WeightLine> {
    series
        .iter()
        .flat_map(|s| {
            s.grids.iter().zip(&s.stats).map(move |(g, st)| WeightLine {
                k: s.particles,
                l: s.runner_samples,
                restart: s.restart,
                t: st.t,
                chaser_factors: g.chaser_factors.clone(),
                runner_weights: g.runner_weights.clone(),
            })
        })
        .collect()
}
