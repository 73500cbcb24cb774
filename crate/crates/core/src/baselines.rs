//! Reference methods trained on given labels only: plain cross-entropy,
//! bootstrapped targets and forward loss correction.
//!
//! Each trains a single Amateur-shaped network with the same batching,
//! shuffling and optimizer contract as [`ExpertNetModel::train`], and is
//! evaluated from features alone.
//!
//! [`ExpertNetModel::train`]: crate::expertnet::ExpertNetModel::train

use crate::data::{one_hot, one_hot_rows, Dataset};
use crate::error::{Error, Result};
use crate::expertnet::{train::run_epochs, train::to_f64, TrainConfig, TrainHistory};
use crate::harness::accuracy;
use crate::nn::{sgd_step, Activation, LossKind, Network, OptimizerState, SgdConfig, Terminal};
use crate::noise::TransitionMatrix;
use crate::rng::{self, tag};
use crate::scalar::{Scalar, Weight};
use crate::tensor::{argmax, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BootstrapVariant {
    Soft,
    Hard,
}

impl BootstrapVariant {
    pub fn default_beta(self) -> f64 {
        match self {
            BootstrapVariant::Soft => 0.8,
            BootstrapVariant::Hard => 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineSpec<T> {
    PlainCe,
    Bootstrap {
        beta: T,
        variant: BootstrapVariant,
    },
    /// Forward correction with the transition matrix that generated the noise.
    Forward(TransitionMatrix<f64>),
}

impl<T: Scalar> BaselineSpec<T> {
    pub fn validate(&self, k: usize) -> Result<()> {
        match self {
            BaselineSpec::PlainCe => Ok(()),
            BaselineSpec::Bootstrap { beta, .. } => check_beta(*beta),
            BaselineSpec::Forward(m) if m.k() == k => Ok(()),
            BaselineSpec::Forward(m) => {
                Err(Error::dim(format!("forward matrix is {0}×{0}, data has {k} classes", m.k())))
            }
        }
    }
}

fn check_beta<T: Scalar>(beta: T) -> Result<()> {
    if beta > T::zero() && beta <= T::one() {
        Ok(())
    } else {
        Err(Error::config(format!("bootstrap beta {beta} outside (0, 1]")))
    }
}

fn check_distribution<T: Scalar>(p: &[T]) -> Result<()> {
    let s: T = p.iter().copied().sum();
    if p.iter().any(|&v| !(v >= T::zero() && v <= T::one())) || (s - T::one()).abs() > T::sum_tolerance() {
        return Err(Error::data("prediction is not a probability vector"));
    }
    Ok(())
}

/// Soft: `β·onehot(y) + (1−β)·pred`; hard: `β·onehot(y) + (1−β)·onehot(argmax pred)`.
pub fn bootstrap_target<T: Scalar>(pred: &[T], given: usize, beta: T, variant: BootstrapVariant) -> Result<Vec<T>> {
    if !(beta >= T::zero() && beta <= T::one()) {
        return Err(Error::config(format!("bootstrap beta {beta} outside [0, 1]")));
    }
    check_distribution(pred)?;
    let k = pred.len();
    let label = one_hot::<T>(given, k)?;
    let model_part = match variant {
        BootstrapVariant::Soft => pred.to_vec(),
        BootstrapVariant::Hard => one_hot::<T>(argmax(pred), k)?,
    };
    let rest = T::one() - beta;
    Ok(label.iter().zip(&model_part).map(|(&l, &m)| beta * l + rest * m).collect())
}

/// Predicted given-label distribution `out_j = Σ_i T[i][j]·pred_i`.
pub fn forward_corrected_prediction<T: Scalar, W: Weight>(pred: &[T], matrix: &TransitionMatrix<W>) -> Result<Vec<T>> {
    let k = pred.len();
    if matrix.k() != k {
        return Err(Error::dim(format!("{k} probabilities for a {0}×{0} matrix", matrix.k())));
    }
    check_distribution(pred)?;
    let m = matrix.to_f64();
    Ok((0..k).map(|j| (0..k).map(|i| T::lit(*m.get(i, j)) * pred[i]).sum()).collect())
}

/// Architecture and optimizer for the single baseline network.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig<T> {
    pub hidden: Vec<usize>,
    pub optimizer: SgdConfig<T>,
}

impl<T: Scalar> Default for BaselineConfig<T> {
    fn default() -> Self {
        Self { hidden: vec![128, 64], optimizer: SgdConfig::default() }
    }
}

/// Builds the network the same way [`ExpertNetModel::new`] builds its
/// Amateur, so equal seeds give equal initial weights.
///
/// [`ExpertNetModel::new`]: crate::expertnet::ExpertNetModel::new
pub fn baseline_network<T: Scalar>(input: usize, k: usize, hidden: &[usize], seed: u64) -> Result<Network<T>> {
    let mut rng = rng::derived_stream(seed, &[tag::INIT, 0]);
    Network::mlp(input, hidden, k, Activation::Relu, Terminal::Softmax, &mut rng)
}

struct BaselineState<T> {
    net: Network<T>,
    opt: OptimizerState<T>,
}

/// Trains one baseline on given labels; validation is features-only.
pub fn train_baseline<T: Scalar>(
    spec: &BaselineSpec<T>,
    config: &BaselineConfig<T>,
    train_set: &Dataset<T>,
    val_set: &Dataset<T>,
    train_config: &TrainConfig,
    init_seed: u64,
) -> Result<(Network<T>, TrainHistory)> {
    let k = train_set.num_classes();
    spec.validate(k)?;
    if val_set.dim() != train_set.dim() || val_set.num_classes() != k {
        return Err(Error::dim("training and validation sets disagree on shape"));
    }
    train_set.require_given()?;
    let net = baseline_network(train_set.dim(), k, &config.hidden, init_seed)?;
    let opt = OptimizerState::new(&net, config.optimizer)?;
    let mut state = BaselineState { net, opt };
    let loss = match spec {
        BaselineSpec::Forward(m) => LossKind::ForwardCorrected(m.to_tensor()),
        _ => LossKind::CrossEntropy,
    };

    let history = run_epochs(
        &mut state,
        train_set,
        train_config,
        |s, epoch, batch| {
            let given = batch.require_given()?;
            let targets = match spec {
                BaselineSpec::PlainCe | BaselineSpec::Forward(_) => one_hot_rows(given, k)?,
                BaselineSpec::Bootstrap { beta, variant } => {
                    let pred = s.net.predict(batch.features())?;
                    let rows = pred
                        .iter_rows()
                        .zip(given)
                        .map(|(p, &y)| bootstrap_target(p, y, *beta, *variant))
                        .collect::<Result<Vec<_>>>()?;
                    Tensor::from_rows(&rows)?
                }
            };
            let step = s.net.gradients(batch.features(), &targets, &loss)?;
            let lr = s.opt.lr_at(epoch);
            sgd_step(&mut s.net, &step.grads, &mut s.opt, lr)?;
            Ok((to_f64(step.loss), None))
        },
        |s, epoch| {
            let pred = crate::data::predictions(&s.net.predict(val_set.features())?);
            Ok((to_f64(s.opt.lr_at(epoch)), accuracy(&pred, val_set.true_labels())?, None))
        },
    )?;
    Ok((state.net, history))
}
