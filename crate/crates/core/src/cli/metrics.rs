use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::algorithm::IterationReport;
use crate::error::Result;

/// Column names of `metrics.csv`, version 1.
pub const METRICS_HEADER: [&str; 14] = [
    "iteration",
    "total_steps",
    "mean_return",
    "median_return",
    "surrogate",
    "value_loss",
    "reward_loss",
    "transition_loss",
    "mean_eps",
    "eps_bar_mean",
    "approx_kl",
    "clip_fraction",
    "alpha",
    "lr",
];

pub const TIMING_HEADER: &str = "iteration,wall_seconds";

/// One `metrics.csv` line. Floats use Rust's shortest round-trip formatting,
/// which keeps reruns byte-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    pub total_steps: usize,
    pub mean_return: f64,
    pub median_return: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    pub reward_loss: f64,
    pub transition_loss: f64,
    pub mean_eps: f64,
    pub eps_bar_mean: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub alpha: f64,
    pub lr: f64,
}

impl From<&IterationReport> for MetricsRow {
    fn from(r: &IterationReport) -> Self {
        Self {
            iteration: r.iteration,
            total_steps: r.total_steps,
            mean_return: r.mean_return,
            median_return: r.median_return,
            surrogate: r.surrogate,
            value_loss: r.value_loss,
            reward_loss: r.reward_loss,
            transition_loss: r.transition_loss,
            mean_eps: r.mean_eps,
            eps_bar_mean: r.eps_bar_mean,
            approx_kl: r.approx_kl,
            clip_fraction: r.clip_fraction,
            alpha: r.alpha,
            lr: r.lr,
        }
    }
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.total_steps,
            self.mean_return,
            self.median_return,
            self.surrogate,
            self.value_loss,
            self.reward_loss,
            self.transition_loss,
            self.mean_eps,
            self.eps_bar_mean,
            self.approx_kl,
            self.clip_fraction,
            self.alpha,
            self.lr
        )
    }

    pub fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != METRICS_HEADER.len() {
            return None;
        }
        let x = |i: usize| f[i].parse::<f64>().ok();
        Some(Self {
            iteration: f[0].parse().ok()?,
            total_steps: f[1].parse().ok()?,
            mean_return: x(2)?,
            median_return: x(3)?,
            surrogate: x(4)?,
            value_loss: x(5)?,
            reward_loss: x(6)?,
            transition_loss: x(7)?,
            mean_eps: x(8)?,
            eps_bar_mean: x(9)?,
            approx_kl: x(10)?,
            clip_fraction: x(11)?,
            alpha: x(12)?,
            lr: x(13)?,
        })
    }
}

/// Append-only writer; every row is flushed so a crash leaves a parseable prefix.
pub struct MetricsWriter {
    metrics: BufWriter<File>,
    timing: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(metrics_path: &Path, timing_path: &Path) -> Result<Self> {
        let mut metrics = BufWriter::new(File::create(metrics_path)?);
        let mut timing = BufWriter::new(File::create(timing_path)?);
        writeln!(metrics, "{}", METRICS_HEADER.join(","))?;
        writeln!(timing, "{TIMING_HEADER}")?;
        metrics.flush()?;
        timing.flush()?;
        Ok(Self { metrics, timing })
    }

    pub fn append(&mut self, row: &MetricsRow, wall_seconds: f64) -> Result<()> {
        writeln!(self.metrics, "{}", row.to_csv())?;
        writeln!(self.timing, "{},{wall_seconds:.3}", row.iteration)?;
        self.metrics.flush()?;
        self.timing.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let row = MetricsRow {
            iteration: 3,
            total_steps: 3072,
            mean_return: 0.25,
            median_return: 0.001,
            surrogate: -1e-3,
            value_loss: 0.5,
            reward_loss: 1.0 / 3.0,
            transition_loss: 2.0,
            mean_eps: 0.1,
            eps_bar_mean: 0.05,
            approx_kl: 1e-5,
            clip_fraction: 0.0,
            alpha: 0.1,
            lr: 2.5e-4,
        };
        assert_eq!(MetricsRow::parse(&row.to_csv()), Some(row));
        assert_eq!(METRICS_HEADER.len(), 14);
    }
}
