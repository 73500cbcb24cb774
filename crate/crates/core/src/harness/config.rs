//! TOML experiment configuration, schema version 1.
//!
//! Top-level keys hold the grid axes (`noise_ratios`, `fractions`,
//! `methods`, `seeds`) plus `out`, `threads` and an optional `noise_matrix`
//! CSV. `[dataset]` picks a generator or a table file; `[training]` holds the
//! optimizer and network hyperparameters. Omitted keys take the defaults
//! shown in `configs/blobs.toml`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::baselines::{BaselineConfig, BaselineSpec, BootstrapVariant};
use crate::data::{BlobSpec, TableSchema};
use crate::error::{Error, Result};
use crate::expertnet::{ExpertNetConfig, ExpertTerminal, TrainConfig};
use crate::nn::{LrSchedule, SgdConfig};
use crate::noise::TransitionMatrix;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Expertnet,
    PlainCe,
    Bootstrap,
    BootstrapHard,
    Forward,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Expertnet, Method::PlainCe, Method::Bootstrap, Method::BootstrapHard, Method::Forward];

    pub fn name(self) -> &'static str {
        match self {
            Method::Expertnet => "expertnet",
            Method::PlainCe => "plain-ce",
            Method::Bootstrap => "bootstrap",
            Method::BootstrapHard => "bootstrap-hard",
            Method::Forward => "forward",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| Error::config(format!("unknown method '{s}'")))
    }

    pub fn modes(self) -> &'static [super::Mode] {
        use super::Mode::*;
        match self {
            Method::Expertnet => &[AmateurOnly, Full],
            _ => &[AmateurOnly],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetConfig {
    Blobs {
        classes: usize,
        per_class: usize,
        dim: usize,
        separation: f64,
        #[serde(default = "one")]
        spread: f64,
        #[serde(default = "default_val_fraction")]
        val_fraction: f64,
    },
    Table {
        train: PathBuf,
        val: Option<PathBuf>,
        features: Vec<String>,
        label: String,
        #[serde(default = "default_val_fraction")]
        val_fraction: f64,
    },
}

impl DatasetConfig {
    pub fn blob_spec(&self) -> Option<BlobSpec> {
        match *self {
            DatasetConfig::Blobs { classes, per_class, dim, separation, spread, .. } => {
                Some(BlobSpec { classes, per_class, dim, separation, spread })
            }
            DatasetConfig::Table { .. } => None,
        }
    }

    pub fn table_schema(&self) -> Option<TableSchema> {
        match self {
            DatasetConfig::Table { features, label, .. } => {
                Some(TableSchema { feature_columns: features.clone(), label_column: label.clone() })
            }
            DatasetConfig::Blobs { .. } => None,
        }
    }

    pub fn val_fraction(&self) -> f64 {
        match *self {
            DatasetConfig::Blobs { val_fraction, .. } | DatasetConfig::Table { val_fraction, .. } => val_fraction,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_val_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr_decay_factor: f64,
    /// Epochs between decays; absent means a constant rate.
    pub lr_decay_period: Option<usize>,
    pub amateur_hidden: Vec<usize>,
    pub expert_hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub expert_terminal: String,
    pub bootstrap_beta: f64,
    pub bootstrap_hard_beta: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            lr: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
            lr_decay_factor: 0.1,
            lr_decay_period: None,
            amateur_hidden: vec![128, 64],
            expert_hidden: vec![64, 32],
            leaky_slope: 0.01,
            expert_terminal: "softmax".into(),
            bootstrap_beta: BootstrapVariant::Soft.default_beta(),
            bootstrap_hard_beta: BootstrapVariant::Hard.default_beta(),
        }
    }
}

impl TrainingConfig {
    pub fn sgd(&self) -> SgdConfig<f64> {
        SgdConfig {
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            schedule: LrSchedule { base: self.lr, factor: self.lr_decay_factor, period: self.lr_decay_period },
        }
    }

    pub fn expertnet(&self) -> Result<ExpertNetConfig<f64>> {
        let expert_terminal = match self.expert_terminal.as_str() {
            "softmax" => ExpertTerminal::Softmax,
            "sigmoid" => ExpertTerminal::Sigmoid,
            other => return Err(Error::config(format!("expert_terminal must be softmax or sigmoid, got '{other}'"))),
        };
        Ok(ExpertNetConfig {
            amateur_hidden: self.amateur_hidden.clone(),
            expert_hidden: self.expert_hidden.clone(),
            leaky_slope: self.leaky_slope,
            expert_terminal,
            amateur_opt: self.sgd(),
            expert_opt: self.sgd(),
        })
    }

    pub fn baseline(&self) -> BaselineConfig<f64> {
        BaselineConfig { hidden: self.amateur_hidden.clone(), optimizer: self.sgd() }
    }

    pub fn baseline_spec(&self, method: Method, matrix: &TransitionMatrix<f64>) -> Option<BaselineSpec<f64>> {
        match method {
            Method::Expertnet => None,
            Method::PlainCe => Some(BaselineSpec::PlainCe),
            Method::Bootstrap => {
                Some(BaselineSpec::Bootstrap { beta: self.bootstrap_beta, variant: BootstrapVariant::Soft })
            }
            Method::BootstrapHard => {
                Some(BaselineSpec::Bootstrap { beta: self.bootstrap_hard_beta, variant: BootstrapVariant::Hard })
            }
            Method::Forward => Some(BaselineSpec::Forward(matrix.clone())),
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { epochs: self.epochs, batch_size: self.batch_size, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub noise_ratios: Vec<f64>,
    /// Transition-matrix CSV used instead of symmetric noise.
    pub noise_matrix: Option<PathBuf>,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_fractions() -> Vec<f64> {
    vec![1.0]
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

fn default_threads() -> usize {
    1
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative paths inside it resolve against its directory.
    pub fn read(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(m) = cfg.noise_matrix.as_mut() {
            rebase(m);
        }
        if let DatasetConfig::Table { train, val, .. } = &mut cfg.dataset {
            rebase(train);
            if let Some(v) = val.as_mut() {
                rebase(v);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match (&self.noise_matrix, self.noise_ratios.is_empty()) {
            (Some(_), false) => return Err(Error::config("give either noise_ratios or noise_matrix, not both")),
            (None, true) => return Err(Error::config("noise_ratios must be non-empty")),
            _ => {}
        }
        if let Some(r) = self.noise_ratios.iter().find(|r| !(**r >= 0.0 && **r < 1.0)) {
            return Err(Error::config(format!("noise ratio {r} outside [0, 1)")));
        }
        if self.fractions.is_empty() {
            return Err(Error::config("fractions must be non-empty"));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(Error::config(format!("fraction {f} outside (0, 1]")));
        }
        if self.methods.is_empty() || self.seeds.is_empty() {
            return Err(Error::config("methods and seeds must be non-empty"));
        }
        if self.threads == 0 {
            return Err(Error::config("threads must be positive"));
        }
        let v = self.dataset.val_fraction();
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::config(format!("val_fraction {v} outside (0, 1)")));
        }
        self.training.train_config(0).validate()?;
        self.training.expertnet()?;
        self.training.sgd().validate()?;
        for beta in [self.training.bootstrap_beta, self.training.bootstrap_hard_beta] {
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::config(format!("bootstrap beta {beta} outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// Noise axis: the configured ratios, or the nominal flip rate of the matrix file.
    pub fn noise_axis(&self) -> Result<Vec<(f64, Option<TransitionMatrix<f64>>)>> {
        match &self.noise_matrix {
            Some(path) => {
                let m = TransitionMatrix::read_csv(path)?;
                // Rounded so float residue does not leak into file names and reports.
                let ratio = (m.mean_flip_rate() * 1e12).round() / 1e12;
                Ok(vec![(ratio, Some(m))])
            }
            None => Ok(self.noise_ratios.iter().map(|&r| (r, None)).collect()),
        }
    }
}
