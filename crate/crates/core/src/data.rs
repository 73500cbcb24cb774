//! Datasets of (features, true label, given label) triples.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::scalar::Scalar;
use crate::tensor::{argmax, Tensor};

/// Features with true labels and, after noise injection, given labels.
///
/// Values are immutable once built; operations return new datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Tensor<T>,
    true_labels: Vec<usize>,
    given_labels: Option<Vec<usize>>,
    num_classes: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Tensor<T>, true_labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.shape().len() != 2 {
            return Err(Error::dim("features must be an N×d matrix"));
        }
        if features.rows() != true_labels.len() {
            return Err(Error::data(format!("{} feature rows but {} labels", features.rows(), true_labels.len())));
        }
        if num_classes == 0 {
            return Err(Error::config("class count must be positive"));
        }
        check_labels(&true_labels, num_classes)?;
        Ok(Self { features, true_labels, given_labels: None, num_classes })
    }

    pub fn with_given_labels(&self, given: Vec<usize>) -> Result<Self> {
        if given.len() != self.len() {
            return Err(Error::data(format!("{} given labels for {} samples", given.len(), self.len())));
        }
        check_labels(&given, self.num_classes)?;
        Ok(Self { given_labels: Some(given), ..self.clone() })
    }

    pub fn len(&self) -> usize {
        self.true_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Tensor<T> {
        &self.features
    }

    pub fn true_labels(&self) -> &[usize] {
        &self.true_labels
    }

    pub fn given_labels(&self) -> Option<&[usize]> {
        self.given_labels.as_deref()
    }

    /// Given labels, or a data error when noise has not been injected yet.
    pub fn require_given(&self) -> Result<&[usize]> {
        self.given_labels().ok_or_else(|| Error::data("dataset has no given labels"))
    }

    /// Rows at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Ok(Self {
            features: self.features.select_rows(idx)?,
            true_labels: idx.iter().map(|&i| self.true_labels[i]).collect(),
            given_labels: self.given_labels.as_ref().map(|g| idx.iter().map(|&i| g[i]).collect()),
            num_classes: self.num_classes,
        })
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_classes];
        for &t in &self.true_labels {
            c[t] += 1;
        }
        c
    }

    /// SHA-256 over class count, features and both label sequences.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.num_classes as u64).to_le_bytes());
        h.update((self.dim() as u64).to_le_bytes());
        for v in self.features.data() {
            h.update(v.to_f64().unwrap_or(f64::NAN).to_bits().to_le_bytes());
        }
        for &t in &self.true_labels {
            h.update((t as u64).to_le_bytes());
        }
        match &self.given_labels {
            Some(g) => {
                h.update([1u8]);
                for &y in g {
                    h.update((y as u64).to_le_bytes());
                }
            }
            None => h.update([0u8]),
        }
        hex::encode(h.finalize())
    }
}

fn check_labels(labels: &[usize], k: usize) -> Result<()> {
    match labels.iter().find(|&&l| l >= k) {
        Some(l) => Err(Error::data(format!("label {l} out of range for {k} classes"))),
        None => Ok(()),
    }
}

pub fn one_hot<T: Scalar>(label: usize, k: usize) -> Result<Vec<T>> {
    if label >= k {
        return Err(Error::data(format!("label {label} out of range for {k} classes")));
    }
    let mut v = vec![T::zero(); k];
    v[label] = T::one();
    Ok(v)
}

/// One-hot rows for a label sequence.
pub fn one_hot_rows<T: Scalar>(labels: &[usize], k: usize) -> Result<Tensor<T>> {
    let mut data = Vec::with_capacity(labels.len() * k);
    for &l in labels {
        data.extend(one_hot::<T>(l, k)?);
    }
    Tensor::matrix(labels.len(), k, data)
}

/// Row-wise argmax (ties to the lowest index).
pub fn predictions<T: Scalar>(probs: &Tensor<T>) -> Vec<usize> {
    probs.iter_rows().map(argmax).collect()
}

/// Isotropic Gaussian clusters, one per class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Minimum distance between cluster centers.
    pub separation: f64,
    /// Per-coordinate standard deviation within a cluster.
    pub spread: f64,
}

impl BlobSpec {
    fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::config("blobs need at least 2 classes"));
        }
        if self.per_class == 0 || self.dim == 0 {
            return Err(Error::config("blobs need positive per-class count and dimension"));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return Err(Error::config("blob separation must be positive"));
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            return Err(Error::config("blob spread must be nonnegative"));
        }
        Ok(())
    }

    /// Cluster centers for `seed`.
    ///
    /// With `classes <= dim` the centers are scaled vertices of a randomly
    /// oriented regular simplex, all pairwise distances equal to
    /// `separation`. Otherwise they are Gaussian points rescaled so the
    /// closest pair sits exactly `separation` apart.
    pub fn centers(&self, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let mut rng = rng::derived_stream(seed, &[tag::DATA, 0]);
        let mut gaussian = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let (k, d) = (self.classes, self.dim);
        if k <= d {
            let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
            while basis.len() < k {
                let mut v = gaussian(d);
                for b in &basis {
                    let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-6 {
                    basis.push(v.into_iter().map(|x| x / norm).collect());
                }
            }
            let scale = self.separation / std::f64::consts::SQRT_2;
            Ok(basis.into_iter().map(|b| b.into_iter().map(|x| x * scale).collect()).collect())
        } else {
            let pts: Vec<Vec<f64>> = (0..k).map(|_| gaussian(d)).collect();
            let mut min_dist = f64::INFINITY;
            for i in 0..k {
                for j in i + 1..k {
                    min_dist = min_dist.min(euclidean(&pts[i], &pts[j]));
                }
            }
            if min_dist <= 0.0 {
                return Err(Error::numeric("degenerate blob centers"));
            }
            let scale = self.separation / min_dist;
            Ok(pts.into_iter().map(|p| p.into_iter().map(|x| x * scale).collect()).collect())
        }
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `per_class` draws around each center, class-major order.
pub fn sample_blobs<T: Scalar>(centers: &[Vec<f64>], per_class: usize, spread: f64, seed: u64) -> Result<Dataset<T>> {
    let k = centers.len();
    let d = centers.first().map(Vec::len).ok_or_else(|| Error::config("no centers"))?;
    let mut rng = rng::derived_stream(seed, &[tag::DATA, 1]);
    let mut data = Vec::with_capacity(k * per_class * d);
    let mut labels = Vec::with_capacity(k * per_class);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            for &mu in center {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(T::lit(mu + spread * z));
            }
            labels.push(c);
        }
    }
    Dataset::new(Tensor::matrix(k * per_class, d, data)?, labels, k)
}

pub fn make_blobs<T: Scalar>(spec: &BlobSpec, seed: u64) -> Result<Dataset<T>> {
    let centers = spec.centers(seed)?;
    sample_blobs(&centers, spec.per_class, spec.spread, seed)
}

/// Uniform subset without replacement of `round(fraction · N)` samples,
/// parent order preserved.
pub fn subsample<T: Scalar>(ds: &Dataset<T>, fraction: f64, seed: u64) -> Result<Dataset<T>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(format!("fraction {fraction} outside (0, 1]")));
    }
    if fraction == 1.0 {
        return Ok(ds.clone());
    }
    let size = (fraction * ds.len() as f64).round() as usize;
    if size == 0 {
        return Err(Error::config(format!("fraction {fraction} of {} samples is empty", ds.len())));
    }
    let mut rng = rng::derived_stream(seed, &[tag::SUBSAMPLE]);
    let mut idx = index::sample(&mut rng, ds.len(), size).into_vec();
    idx.sort_unstable();
    ds.select(&idx)
}

/// Random train/validation partition; both sides keep parent order.
pub fn split<T: Scalar>(ds: &Dataset<T>, val_fraction: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::config(format!("validation fraction {val_fraction} outside (0, 1)")));
    }
    let n_val = (val_fraction * ds.len() as f64).round() as usize;
    if n_val == 0 || n_val >= ds.len() {
        return Err(Error::config(format!("cannot split {} samples at {val_fraction}", ds.len())));
    }
    let mut perm: Vec<usize> = (0..ds.len()).collect();
    perm.shuffle(&mut rng::derived_stream(seed, &[tag::SPLIT]));
    let (val, train) = perm.split_at_mut(n_val);
    val.sort_unstable();
    train.sort_unstable();
    Ok((ds.select(train)?, ds.select(val)?))
}

/// Shuffled minibatch index lists for one epoch; the last partial batch is kept.
pub fn epoch_batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::config("cannot batch an empty dataset"));
    }
    if batch_size == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::derived_stream(seed, &[tag::SHUFFLE, epoch as u64]));
    Ok(perm.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Order-sensitive digest of a batch sequence.
pub fn batch_digest(batches: &[Vec<usize>]) -> u64 {
    batches.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        b.iter().fold(h.rotate_left(7) ^ 0xff, |h, &i| (h ^ i as u64).wrapping_mul(0x0000_0100_0000_01b3))
    })
}

/// Column selection for [`read_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct TableSchema {
    pub feature_columns: Vec<String>,
    pub label_column: String,
}

/// Raw table contents: features exactly as written and label strings.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable<T> {
    pub features: Tensor<T>,
    pub labels: Vec<String>,
}

/// Reads a comma-separated table with a header row.
pub fn read_table<T: Scalar>(path: &Path, schema: &TableSchema) -> Result<RawTable<T>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Input { line: 1, message: format!("missing column '{name}'") })
    };
    let feature_idx = schema.feature_columns.iter().map(|c| column(c)).collect::<Result<Vec<_>>>()?;
    let label_idx = column(&schema.label_column)?;
    if feature_idx.is_empty() {
        return Err(Error::config("table schema lists no feature columns"));
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        for &i in &feature_idx {
            let cell = record.get(i).unwrap_or("").trim();
            let v: f64 =
                cell.parse().map_err(|_| Error::Input { line, message: format!("'{cell}' is not a number") })?;
            if !v.is_finite() {
                return Err(Error::Input { line, message: format!("non-finite value '{cell}'") });
            }
            data.push(T::lit(v));
        }
        let label = record.get(label_idx).unwrap_or("").trim();
        if label.is_empty() {
            return Err(Error::Input { line, message: "empty label".into() });
        }
        labels.push(label.to_string());
    }
    if labels.is_empty() {
        return Err(Error::Input { line: 1, message: "table has no data rows".into() });
    }
    Ok(RawTable { features: Tensor::matrix(labels.len(), feature_idx.len(), data)?, labels })
}

/// Dense class indices for string labels.
///
/// Labels are sorted numerically when all of them parse as integers,
/// lexicographically otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl LabelMap {
    pub fn fit(labels: &[String]) -> Self {
        let mut names: Vec<String> = labels.to_vec();
        names.sort_unstable();
        names.dedup();
        if names.iter().all(|n| n.parse::<i64>().is_ok()) {
            names.sort_by_key(|n| n.parse::<i64>().expect("checked"));
        }
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Self { names, index }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn encode(&self, labels: &[String]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                self.index.get(l).copied().ok_or_else(|| Error::data(format!("label '{l}' not seen in training data")))
            })
            .collect()
    }

    /// `index,label` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,label\n");
        for (i, n) in self.names.iter().enumerate() {
            s.push_str(&format!("{i},{n}\n"));
        }
        s
    }
}

/// Per-column affine normalization to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const VARIANCE_FLOOR: f64 = 1e-12;

impl Standardizer {
    /// Two-pass population statistics.
    pub fn fit<T: Scalar>(features: &Tensor<T>) -> Self {
        let (n, d) = (features.rows(), features.cols());
        let mut mean = vec![0.0; d];
        for row in features.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v.to_f64().unwrap_or(f64::NAN);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for row in features.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                let dv = v.to_f64().unwrap_or(f64::NAN) - m;
                *s += dv * dv;
            }
        }
        let std = var.into_iter().map(|s| (s / n as f64).sqrt()).collect();
        Self { mean, std }
    }

    /// Constant columns (variance below the floor) map to zero.
    pub fn apply<T: Scalar>(&self, features: &Tensor<T>) -> Result<Tensor<T>> {
        if features.cols() != self.mean.len() {
            return Err(Error::dim("standardizer fitted on a different column count"));
        }
        let mut out = features.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                let x = v.to_f64().unwrap_or(f64::NAN) - self.mean[j];
                let s = self.std[j];
                *v = T::lit(if s * s < VARIANCE_FLOOR { 0.0 } else { x / s });
            }
        }
        Ok(out)
    }
}

/// Labelled train/validation pair built from delimited tables.
#[derive(Debug, Clone)]
pub struct TableSplit<T> {
    pub train: Dataset<T>,
    pub val: Dataset<T>,
    pub labels: LabelMap,
    pub standardizer: Standardizer,
}

/// Loads a training table and either a separate validation table or a
/// random `val_fraction` hold-out. Labels and normalization are fitted on
/// the training side only.
pub fn load_train_val<T: Scalar>(
    train_path: &Path,
    val_path: Option<&Path>,
    schema: &TableSchema,
    val_fraction: f64,
    seed: u64,
) -> Result<TableSplit<T>> {
    let raw = read_table::<T>(train_path, schema)?;
    let (train_raw, val_raw) = match val_path {
        Some(p) => (raw, read_table::<T>(p, schema)?),
        None => {
            let n_val = (val_fraction * raw.labels.len() as f64).round() as usize;
            if !(val_fraction > 0.0 && val_fraction < 1.0) || n_val == 0 || n_val >= raw.labels.len() {
                return Err(Error::config(format!("cannot hold out {val_fraction} of the table")));
            }
            let mut perm: Vec<usize> = (0..raw.labels.len()).collect();
            perm.shuffle(&mut rng::derived_stream(seed, &[tag::SPLIT]));
            let (v, t) = perm.split_at_mut(n_val);
            v.sort_unstable();
            t.sort_unstable();
            let pick = |idx: &[usize]| -> Result<RawTable<T>> {
                Ok(RawTable {
                    features: raw.features.select_rows(idx)?,
                    labels: idx.iter().map(|&i| raw.labels[i].clone()).collect(),
                })
            };
            (pick(t)?, pick(v)?)
        }
    };
    let labels = LabelMap::fit(&train_raw.labels);
    let standardizer = Standardizer::fit(&train_raw.features);
    let k = labels.len().max(2);
    let train = Dataset::new(standardizer.apply(&train_raw.features)?, labels.encode(&train_raw.labels)?, k)?;
    let val = Dataset::new(standardizer.apply(&val_raw.features)?, labels.encode(&val_raw.labels)?, k)?;
    Ok(TableSplit { train, val, labels, standardizer })
}
