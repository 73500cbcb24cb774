use std::fmt::Write as _;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{DatasetConfig, ExperimentConfig, Method};
use super::{accuracy, Mode, ResultRecord};
use crate::baselines::train_baseline;
use crate::data::{load_train_val, make_blobs, predictions, split, subsample, Dataset};
use crate::error::{Error, Result};
use crate::expertnet::{ExpertNetModel, TrainHistory};
use crate::noise::{corrupt_labels, empirical_matrix, EmpiricalMatrix, NoiseSpec, TransitionMatrix};
use crate::rng::{derive_seed, real_key, str_key, tag};

/// The data shared by every method in one (noise ratio, fraction, seed) cell.
#[derive(Debug, Clone)]
pub struct CellData {
    pub train: Dataset<f64>,
    pub val: Dataset<f64>,
    /// The matrix the given labels were drawn from.
    pub matrix: TransitionMatrix<f64>,
    pub dataset_hash: String,
    /// Seeds the per-epoch batch order; shared by all methods in the cell.
    pub batch_seed: u64,
}

/// Builds a cell. The clean split depends only on `seed`; training noise
/// depends on (`seed`, ratio) and is drawn before subsampling, so smaller
/// fractions are subsets of the same noisy set.
pub fn build_cell_data(
    config: &ExperimentConfig,
    ratio: f64,
    matrix: Option<&TransitionMatrix<f64>>,
    fraction: f64,
    seed: u64,
) -> Result<CellData> {
    let (train, val) = match &config.dataset {
        DatasetConfig::Blobs { val_fraction, .. } => {
            let spec = config.dataset.blob_spec().expect("blob dataset");
            let all = make_blobs::<f64>(&spec, derive_seed(seed, &[tag::DATA]))?;
            split(&all, *val_fraction, derive_seed(seed, &[tag::SPLIT]))?
        }
        DatasetConfig::Table { train, val, val_fraction, .. } => {
            let schema = config.dataset.table_schema().expect("table dataset");
            let s = load_train_val(train, val.as_deref(), &schema, *val_fraction, derive_seed(seed, &[tag::SPLIT]))?;
            (s.train, s.val)
        }
    };
    let k = train.num_classes();
    let matrix = match matrix {
        Some(m) => m.clone(),
        None => TransitionMatrix::symmetric(k, ratio)?,
    };
    let noise = |tag_value: u64| NoiseSpec::matrix(matrix.clone(), derive_seed(seed, &[tag_value, real_key(ratio)]));
    let noisy_train = train.with_given_labels(corrupt_labels(train.true_labels(), k, &noise(tag::NOISE_TRAIN))?)?;
    let val = val.with_given_labels(corrupt_labels(val.true_labels(), k, &noise(tag::NOISE_VAL))?)?;
    let train = subsample(&noisy_train, fraction, derive_seed(seed, &[tag::SUBSAMPLE, real_key(fraction)]))?;

    let mut h = Sha256::new();
    h.update(train.content_hash().as_bytes());
    h.update(val.content_hash().as_bytes());
    Ok(CellData {
        train,
        val,
        matrix,
        dataset_hash: hex::encode(h.finalize()),
        batch_seed: derive_seed(seed, &[tag::SHUFFLE, real_key(ratio), real_key(fraction)]),
    })
}

/// Initialization seed of one method in one cell.
pub fn init_seed(seed: u64, ratio: f64, fraction: f64, method: Method) -> u64 {
    derive_seed(seed, &[tag::METHOD, real_key(ratio), real_key(fraction), str_key(method.name())])
}

#[derive(Debug)]
pub struct UnitOutput {
    pub records: Vec<ResultRecord>,
    /// Per-epoch lines for the run log.
    pub log: String,
    /// The trained model, for expertnet units that succeeded.
    pub model: Option<ExpertNetModel<f64>>,
}

/// Trains and evaluates one method on one cell. Failures become records
/// with status `failed: ...` rather than errors.
pub fn run_unit(
    config: &ExperimentConfig,
    method: Method,
    ratio: f64,
    matrix: Option<&TransitionMatrix<f64>>,
    fraction: f64,
    seed: u64,
) -> UnitOutput {
    let start = Instant::now();
    let header = format!("{} rho={ratio} fraction={fraction} seed={seed}", method.name());
    let outcome = build_cell_data(config, ratio, matrix, fraction, seed)
        .and_then(|cell| train_method(config, method, &cell, ratio, fraction, seed).map(|r| (cell, r)));
    let wall_seconds = start.elapsed().as_secs_f64();
    let mut log = String::new();
    let record = |mode: Mode, accuracy: Option<f64>, epochs_run: usize, hash: &str, status: String| ResultRecord {
        method,
        mode,
        noise_ratio: ratio,
        fraction,
        seed,
        accuracy,
        wall_seconds,
        epochs_run,
        dataset_hash: hash.to_string(),
        status,
    };
    match outcome {
        Ok((cell, trained)) => {
            let _ = writeln!(log, "{header} dataset={}", cell.dataset_hash);
            for e in &trained.history.epochs {
                let _ = write!(
                    log,
                    "  epoch {:>4} batches {:016x} lr {:.6e} loss_a {:.6}",
                    e.epoch, e.batch_digest, e.lr, e.amateur_loss
                );
                if let Some(le) = e.expert_loss {
                    let _ = write!(log, " loss_e {le:.6}");
                }
                let _ = write!(log, " acc_a {:.4}", e.amateur_accuracy);
                if let Some(af) = e.full_accuracy {
                    let _ = write!(log, " acc_full {af:.4}");
                }
                let _ = writeln!(log);
            }
            let epochs = trained.history.len();
            let records = trained
                .accuracies
                .iter()
                .map(|&(mode, acc)| record(mode, Some(acc), epochs, &cell.dataset_hash, "ok".into()))
                .collect();
            info!("{header}: {:?}", trained.accuracies);
            UnitOutput { records, log, model: trained.model }
        }
        Err(e) => {
            warn!("{header}: {e}");
            let _ = writeln!(log, "{header} FAILED: {e}");
            let status = format!("failed: {e}");
            let records = method.modes().iter().map(|&m| record(m, None, 0, "", status.clone())).collect();
            UnitOutput { records, log, model: None }
        }
    }
}

struct Trained {
    history: TrainHistory,
    accuracies: Vec<(Mode, f64)>,
    model: Option<ExpertNetModel<f64>>,
}

fn train_method(
    config: &ExperimentConfig,
    method: Method,
    cell: &CellData,
    ratio: f64,
    fraction: f64,
    seed: u64,
) -> Result<Trained> {
    let t = &config.training;
    let train_cfg = t.train_config(cell.batch_seed);
    let init = init_seed(seed, ratio, fraction, method);
    let truths = cell.val.true_labels();
    match t.baseline_spec(method, &cell.matrix) {
        None => {
            let mut model = ExpertNetModel::new(cell.train.dim(), cell.train.num_classes(), &t.expertnet()?, init)?;
            let history = model.train(&cell.train, &cell.val, &train_cfg)?;
            let x = cell.val.features();
            let acc_a = accuracy(&model.infer_amateur(x)?, truths)?;
            let acc_f = accuracy(&model.infer_full(x, cell.val.require_given()?)?, truths)?;
            Ok(Trained {
                history,
                accuracies: vec![(Mode::AmateurOnly, acc_a), (Mode::Full, acc_f)],
                model: Some(model),
            })
        }
        Some(spec) => {
            let (net, history) = train_baseline(&spec, &t.baseline(), &cell.train, &cell.val, &train_cfg, init)?;
            let acc = accuracy(&predictions(&net.predict(cell.val.features())?), truths)?;
            Ok(Trained { history, accuracies: vec![(Mode::AmateurOnly, acc)], model: None })
        }
    }
}

#[derive(Debug)]
pub struct GridOutput {
    /// Sorted by (noise ratio, fraction descending, method, mode, seed).
    pub records: Vec<ResultRecord>,
    pub log: String,
}

impl GridOutput {
    pub fn failed_cells(&self) -> usize {
        self.records.iter().filter(|r| r.failed()).count()
    }
}

/// Runs every (noise, fraction, seed, method) unit on a pool of `threads`
/// workers. Output does not depend on the thread count.
pub fn run_grid(config: &ExperimentConfig, threads: usize) -> Result<GridOutput> {
    config.validate()?;
    let noise = config.noise_axis()?;
    let mut units = Vec::new();
    for (ratio, matrix) in &noise {
        for &fraction in &config.fractions {
            for &seed in &config.seeds {
                for &method in &config.methods {
                    units.push((method, *ratio, matrix.as_ref(), fraction, seed));
                }
            }
        }
    }
    info!("running {} units on {threads} threads", units.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::config(e.to_string()))?;
    let outputs: Vec<UnitOutput> = pool.install(|| {
        units
            .par_iter()
            .map(|&(method, ratio, matrix, fraction, seed)| run_unit(config, method, ratio, matrix, fraction, seed))
            .collect()
    });
    let mut log = String::new();
    let mut records = Vec::new();
    for out in outputs {
        log.push_str(&out.log);
        records.extend(out.records);
    }
    sort_records(&mut records);
    Ok(GridOutput { records, log })
}

pub(crate) fn sort_records(records: &mut [ResultRecord]) {
    records.sort_by(|a, b| {
        a.noise_ratio
            .total_cmp(&b.noise_ratio)
            .then(b.fraction.total_cmp(&a.fraction))
            .then(a.method.cmp(&b.method))
            .then(a.mode.cmp(&b.mode))
            .then(a.seed.cmp(&b.seed))
    });
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseStats {
    pub nominal: TransitionMatrix<f64>,
    pub empirical: EmpiricalMatrix,
    /// Observed fraction of labels that changed.
    pub flip_rate: f64,
    pub max_deviation: f64,
}

/// Corrupts `n` class-balanced labels and compares the result with the
/// nominal matrix.
pub fn noise_stats(k: usize, spec: &NoiseSpec<f64>, n: usize) -> Result<NoiseStats> {
    if n == 0 {
        return Err(Error::config("sample count must be positive"));
    }
    let nominal = spec.transition(k)?;
    let truths: Vec<usize> = (0..n).map(|i| i % k).collect();
    let given = corrupt_labels(&truths, k, spec)?;
    let flips = truths.iter().zip(&given).filter(|(t, g)| t != g).count();
    let empirical = empirical_matrix(&truths, &given, k)?;
    let max_deviation = empirical.matrix.max_abs_deviation(&nominal);
    Ok(NoiseStats { nominal, empirical, flip_rate: flips as f64 / n as f64, max_deviation })
}
