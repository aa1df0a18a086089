//! One JSON record per episode, appended line by line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Demo,
    Explore,
    Train,
    Validate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub phase: Phase,
    /// 0 in single-agent runs.
    #[serde(default)]
    pub agent: usize,
    /// Index within the phase (validation index for `validate`).
    pub episode: usize,
    pub steps: u64,
    /// Environment steps taken by this agent so far in the run.
    pub total_steps: u64,
    /// Episode return; mean over episodes for `validate`.
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub actor_loss: Option<f64>,
    pub critic_loss: Option<[f64; 2]>,
    pub success: bool,
    /// Fraction of successful episodes (`validate` only).
    pub success_rate: Option<f64>,
    pub wall_seconds: f64,
}

impl MetricsRecord {
    pub fn episode(phase: Phase, agent: usize, episode: usize, steps: u64, total_steps: u64, episode_return: f64) -> Self {
        Self {
            phase,
            agent,
            episode,
            steps,
            total_steps,
            episode_return,
            actor_loss: None,
            critic_loss: None,
            success: false,
            success_rate: None,
            wall_seconds: 0.0,
        }
    }
}

#[derive(Debug)]
pub struct MetricsWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let f = File::create(&path).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
        Ok(Self { path, out: BufWriter::new(f) })
    }

    pub fn write(&mut self, record: &MetricsRecord) -> Result<()> {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|source| HarnessError::Io { path: self.path.clone(), source })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|source| HarnessError::Io { path: path.into(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| HarnessError::Metrics(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// The log with every wall-clock field zeroed, for reproducibility checks.
pub fn without_wall_clock(records: &[MetricsRecord]) -> Vec<MetricsRecord> {
    records.iter().map(|r| MetricsRecord { wall_seconds: 0.0, ..r.clone() }).collect()
}
