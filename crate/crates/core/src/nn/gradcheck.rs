//! Randomized finite-difference verification of [`Network::gradients`].
//!
//! Cases cycle through every hidden activation, both probability terminals
//! and both loss kinds. Inputs are resampled until no rectifier
//! pre-activation lies within `KINK_MARGIN` of zero, where a central
//! difference would straddle the kink. Whole cases are redrawn when a
//! central difference is nonzero but below `RESOLUTION`: with a step of
//! 1e-5, rounding in the loss leaves about 1e-11 of absolute noise, too much
//! to certify such an entry to 1e-4 relative error.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{softmax, Activation, Layer, LossKind, Network, Terminal};
use crate::error::Result;
use crate::rng;
use crate::tensor::Tensor;

pub const STEP: f64 = 1e-5;
pub const REL_TOLERANCE: f64 = 1e-4;
pub const REL_FLOOR: f64 = 1e-8;
const KINK_MARGIN: f64 = 1e-3;
const RESOLUTION: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub label: String,
    pub net: Network<f64>,
    pub batch: Tensor<f64>,
    pub targets: Tensor<f64>,
    pub loss: LossKind<f64>,
}

#[derive(Debug, Clone)]
pub struct CaseReport {
    pub label: String,
    pub entries: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub cases: Vec<CaseReport>,
}

impl SuiteReport {
    pub fn max_rel_error(&self) -> f64 {
        self.cases.iter().map(|c| c.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseReport> {
        self.cases.iter().filter(|c| c.max_rel_error > REL_TOLERANCE)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// `|a - b| / max(|a|, |b|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn random_distribution<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let logits: Vec<f64> = (0..k).map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal)).collect();
    softmax(&logits).expect("finite logits")
}

fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor<f64> {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::matrix(rows, cols, data).expect("positive dims")
}

fn near_kink(net: &Network<f64>, batch: &Tensor<f64>) -> Result<bool> {
    let pass = net.forward(batch)?;
    Ok(net.layers().iter().enumerate().any(|(i, layer)| {
        matches!(layer, Layer::Activation(Activation::Relu | Activation::LeakyRelu(_)))
            && pass.activations[i].data().iter().any(|z| z.abs() < KINK_MARGIN)
    }))
}

/// Builds the `index`-th randomized case.
pub fn random_case<R: Rng>(index: usize, rng: &mut R) -> Result<GradCheckCase> {
    loop {
        let case = draw_case(index, rng)?;
        let fd = finite_differences(&case, STEP)?;
        if fd.iter().flatten().all(|&g| g == 0.0 || g.abs() >= RESOLUTION) {
            return Ok(case);
        }
    }
}

fn draw_case<R: Rng>(index: usize, rng: &mut R) -> Result<GradCheckCase> {
    let hidden_kinds = [Activation::Relu, Activation::LeakyRelu(0.1), Activation::Sigmoid];
    let hidden_act = hidden_kinds[index % 3];
    let terminal = if (index / 3).is_multiple_of(2) { Terminal::Softmax } else { Terminal::SigmoidNormalized };
    let forward_corrected = (index / 6) % 2 == 1;

    let input = rng.random_range(1..=5);
    let k = rng.random_range(2..=5);
    let hidden: Vec<usize> = (0..rng.random_range(0..=2)).map(|_| rng.random_range(2..=6)).collect();
    let batch_size = rng.random_range(1..=4);
    let net = Network::mlp(input, &hidden, k, hidden_act, terminal, rng)?;

    let mut batch = random_matrix(batch_size, input, rng);
    while near_kink(&net, &batch)? {
        batch = random_matrix(batch_size, input, rng);
    }

    let hard_targets = rng.random_bool(0.5);
    let rows: Vec<Vec<f64>> = (0..batch_size)
        .map(|_| {
            if hard_targets {
                let mut v = vec![0.0; k];
                v[rng.random_range(0..k)] = 1.0;
                v
            } else {
                random_distribution(k, rng)
            }
        })
        .collect();
    let targets = Tensor::from_rows(&rows)?;

    let loss = if forward_corrected {
        let t_rows: Vec<Vec<f64>> = (0..k).map(|_| random_distribution(k, rng)).collect();
        LossKind::ForwardCorrected(Tensor::from_rows(&t_rows)?)
    } else {
        LossKind::CrossEntropy
    };
    let label = format!(
        "case {index}: in={input} hidden={hidden:?} k={k} batch={batch_size} act={} terminal={terminal:?} loss={} targets={}",
        hidden_act.name(),
        if forward_corrected { "forward-corrected" } else { "cross-entropy" },
        if hard_targets { "hard" } else { "soft" },
    );
    Ok(GradCheckCase { label, net, batch, targets, loss })
}

/// Central differences of the batch loss w.r.t. every parameter.
pub fn finite_differences(case: &GradCheckCase, h: f64) -> Result<Vec<Vec<f64>>> {
    let mut net = case.net.clone();
    let shapes: Vec<usize> = net.parameters().iter().map(|p| p.len()).collect();
    let mut out = Vec::with_capacity(shapes.len());
    for (pi, &len) in shapes.iter().enumerate() {
        let mut fd = Vec::with_capacity(len);
        for e in 0..len {
            let orig = net.parameters()[pi].data()[e];
            net.parameters_mut()[pi].data_mut()[e] = orig + h;
            let up = net.loss(&case.batch, &case.targets, &case.loss)?;
            net.parameters_mut()[pi].data_mut()[e] = orig - h;
            let down = net.loss(&case.batch, &case.targets, &case.loss)?;
            net.parameters_mut()[pi].data_mut()[e] = orig;
            fd.push((up - down) / (2.0 * h));
        }
        out.push(fd);
    }
    Ok(out)
}

pub fn check_case(case: &GradCheckCase) -> Result<CaseReport> {
    let analytic = case.net.gradients(&case.batch, &case.targets, &case.loss)?.grads;
    let numeric = finite_differences(case, STEP)?;
    let mut entries = 0;
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.tensors.iter().zip(&numeric) {
        for (&x, &y) in a.data().iter().zip(n) {
            entries += 1;
            worst = worst.max(relative_error(x, y));
        }
    }
    Ok(CaseReport { label: case.label.clone(), entries, max_rel_error: worst })
}

pub fn run_suite(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = rng::stream(seed);
    let reports =
        (0..cases).map(|i| random_case(i, &mut rng).and_then(|c| check_case(&c))).collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport { cases: reports })
}
