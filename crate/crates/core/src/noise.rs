//! Label-noise models.
//!
//! A [`TransitionMatrix`] row `i` is the distribution of the given label
//! conditioned on true class `i`. Labels are corrupted independently per
//! sample by drawing from the row of their true class.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::{Scalar, Weight};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<W> {
    k: usize,
    entries: Vec<W>,
}

impl<W: Weight> TransitionMatrix<W> {
    /// Validates a row-major K×K table.
    pub fn new(k: usize, entries: Vec<W>) -> Result<Self> {
        if k == 0 || entries.len() != k * k {
            return Err(Error::dim(format!("{} entries do not form a {k}×{k} matrix", entries.len())));
        }
        let m = Self { k, entries };
        m.validate()?;
        Ok(m)
    }

    pub fn from_rows(rows: Vec<Vec<W>>) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::dim("transition matrix must be square"));
        }
        Self::new(k, rows.into_iter().flatten().collect())
    }

    pub fn identity(k: usize) -> Result<Self> {
        let entries = (0..k * k).map(|i| if i / k == i % k { W::one() } else { W::zero() }).collect();
        Self::new(k, entries)
    }

    /// Diagonal `1 − ratio`, off-diagonal `ratio / (K − 1)`.
    pub fn symmetric(k: usize, ratio: W) -> Result<Self> {
        if k < 2 {
            return Err(Error::config(format!("symmetric noise needs at least 2 classes, got {k}")));
        }
        if !(ratio >= W::zero() && ratio < W::one()) {
            return Err(Error::config(format!("noise ratio {ratio:?} outside [0, 1)")));
        }
        let others = W::from_usize(k - 1).ok_or_else(|| Error::config("class count overflow"))?;
        let off = ratio.clone() / others;
        let diag = W::one() - ratio;
        let entries = (0..k * k).map(|i| if i / k == i % k { diag.clone() } else { off.clone() }).collect();
        Self::new(k, entries)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.k {
            let row = self.row(i);
            if row.iter().any(|v| !(*v >= W::zero() && *v <= W::one())) {
                return Err(Error::data(format!("transition row {i} has entries outside [0, 1]")));
            }
            let sum = row.iter().cloned().fold(W::zero(), |a, b| a + b);
            if sum.abs_diff(&W::one()) > W::row_tolerance() {
                return Err(Error::data(format!("transition row {i} sums to {sum:?}")));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, true_class: usize, given: usize) -> &W {
        &self.entries[true_class * self.k + given]
    }

    pub fn row(&self, true_class: usize) -> &[W] {
        &self.entries[true_class * self.k..(true_class + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[W]> {
        self.entries.chunks(self.k)
    }

    pub fn to_f64(&self) -> TransitionMatrix<f64> {
        TransitionMatrix { k: self.k, entries: self.entries.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect() }
    }

    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let data = self.entries.iter().map(|v| T::lit(v.to_f64().unwrap_or(f64::NAN))).collect();
        Tensor::matrix(self.k, self.k, data).expect("k > 0")
    }

    /// Mean off-diagonal mass, i.e. the flip rate under a uniform class prior.
    pub fn mean_flip_rate(&self) -> f64 {
        let m = self.to_f64();
        1.0 - (0..self.k).map(|i| *m.get(i, i)).sum::<f64>() / self.k as f64
    }

    pub fn max_abs_deviation(&self, other: &Self) -> f64 {
        self.to_f64().entries.iter().zip(&other.to_f64().entries).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl TransitionMatrix<f64> {
    /// K lines of K comma-separated decimals, no header.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|c| {
                    c.trim().parse::<f64>().map_err(|e| Error::Input {
                        line: n as u64 + 1,
                        message: format!("bad matrix entry '{}': {e}", c.trim()),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind<W> {
    Symmetric(W),
    Matrix(TransitionMatrix<W>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec<W> {
    pub kind: NoiseKind<W>,
    pub seed: u64,
}

impl<W: Weight> NoiseSpec<W> {
    pub fn symmetric(ratio: W, seed: u64) -> Self {
        Self { kind: NoiseKind::Symmetric(ratio), seed }
    }

    pub fn matrix(matrix: TransitionMatrix<W>, seed: u64) -> Self {
        Self { kind: NoiseKind::Matrix(matrix), seed }
    }

    /// The transition matrix this spec samples from over `k` classes.
    pub fn transition(&self, k: usize) -> Result<TransitionMatrix<W>> {
        match &self.kind {
            NoiseKind::Symmetric(r) => TransitionMatrix::symmetric(k, r.clone()),
            NoiseKind::Matrix(m) if m.k() == k => Ok(m.clone()),
            NoiseKind::Matrix(m) => {
                Err(Error::dim(format!("transition matrix is {0}×{0} but data has {k} classes", m.k())))
            }
        }
    }
}

/// Draws a given label for every true label from its transition row.
pub fn corrupt_labels<W: Weight>(true_labels: &[usize], k: usize, spec: &NoiseSpec<W>) -> Result<Vec<usize>> {
    let matrix = spec.transition(k)?.to_f64();
    let cumulative: Vec<Vec<f64>> = matrix
        .rows()
        .map(|row| {
            row.iter()
                .scan(0.0, |acc, &p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let last_positive: Vec<usize> = matrix.rows().map(|row| row.iter().rposition(|&p| p > 0.0).unwrap_or(0)).collect();

    let mut rng = rng::stream(spec.seed);
    true_labels
        .iter()
        .map(|&t| {
            if t >= k {
                return Err(Error::data(format!("label {t} out of range for {k} classes")));
            }
            let u: f64 = rng.random();
            let row = &matrix.row(t);
            Ok(cumulative[t].iter().zip(row.iter()).position(|(&c, &p)| p > 0.0 && u < c).unwrap_or(last_positive[t]))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMatrix {
    pub matrix: TransitionMatrix<f64>,
    /// Per true class sample counts.
    pub support: Vec<usize>,
    /// True classes with no samples; their rows are uniform.
    pub unsupported: Vec<usize>,
}

/// Row-normalized counts of (true, given) pairs.
pub fn empirical_matrix(true_labels: &[usize], given_labels: &[usize], k: usize) -> Result<EmpiricalMatrix> {
    if true_labels.len() != given_labels.len() {
        return Err(Error::data(format!("{} true labels vs {} given labels", true_labels.len(), given_labels.len())));
    }
    if k == 0 {
        return Err(Error::config("class count must be positive"));
    }
    let mut counts = vec![0usize; k * k];
    for (&t, &y) in true_labels.iter().zip(given_labels) {
        if t >= k || y >= k {
            return Err(Error::data(format!("label pair ({t}, {y}) out of range for {k} classes")));
        }
        counts[t * k + y] += 1;
    }
    let mut entries = Vec::with_capacity(k * k);
    let mut support = Vec::with_capacity(k);
    let mut unsupported = Vec::new();
    for i in 0..k {
        let row = &counts[i * k..(i + 1) * k];
        let n: usize = row.iter().sum();
        support.push(n);
        if n == 0 {
            unsupported.push(i);
            entries.extend(std::iter::repeat_n(1.0 / k as f64, k));
        } else {
            entries.extend(row.iter().map(|&c| c as f64 / n as f64));
        }
    }
    Ok(EmpiricalMatrix { matrix: TransitionMatrix::new(k, entries)?, support, unsupported })
}
