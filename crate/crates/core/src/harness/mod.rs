//! Experiment grid: configuration, execution and CSV reports.

mod config;
mod grid;
mod report;

pub use config::{DatasetConfig, ExperimentConfig, Method, TrainingConfig, SCHEMA_VERSION};
pub use grid::{
    build_cell_data, init_seed, noise_stats, run_grid, run_unit, CellData, GridOutput, NoiseStats, UnitOutput,
};
pub use report::{emit_report, format_cell, pivot_file_name, pivot_tables, ReportFiles};

use crate::error::{Error, Result};

/// Fraction of predictions equal to the true labels.
pub fn accuracy(predictions: &[usize], truths: &[usize]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::data(format!("{} predictions for {} labels", predictions.len(), truths.len())));
    }
    if truths.is_empty() {
        return Err(Error::data("accuracy of an empty set"));
    }
    let correct = predictions.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / truths.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    AmateurOnly,
    Full,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::AmateurOnly => "amateur-only",
            Mode::Full => "full",
        }
    }
}

/// One (method, mode, noise ratio, fraction, seed) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub method: Method,
    pub mode: Mode,
    pub noise_ratio: f64,
    pub fraction: f64,
    pub seed: u64,
    /// `None` when the cell failed.
    pub accuracy: Option<f64>,
    pub wall_seconds: f64,
    pub epochs_run: usize,
    pub dataset_hash: String,
    pub status: String,
}

impl ResultRecord {
    pub fn failed(&self) -> bool {
        self.accuracy.is_none()
    }
}
