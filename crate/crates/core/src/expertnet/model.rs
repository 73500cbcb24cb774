use crate::data::{one_hot_rows, predictions};
use crate::error::{Error, Result};
use crate::nn::{sgd_step, Activation, LossKind, Network, OptimizerState, SgdConfig, Terminal};
use crate::rng::{self, tag};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpertTerminal {
    Softmax,
    /// Sigmoid outputs rescaled to sum to one.
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertNetConfig<T> {
    pub amateur_hidden: Vec<usize>,
    pub expert_hidden: Vec<usize>,
    pub leaky_slope: T,
    pub expert_terminal: ExpertTerminal,
    pub amateur_opt: SgdConfig<T>,
    pub expert_opt: SgdConfig<T>,
}

impl<T: Scalar> Default for ExpertNetConfig<T> {
    fn default() -> Self {
        Self {
            amateur_hidden: vec![128, 64],
            expert_hidden: vec![64, 32],
            leaky_slope: T::lit(0.01),
            expert_terminal: ExpertTerminal::Softmax,
            amateur_opt: SgdConfig::default(),
            expert_opt: SgdConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExpertNetModel<T> {
    pub amateur: Network<T>,
    pub expert: Network<T>,
    pub amateur_opt: OptimizerState<T>,
    pub expert_opt: OptimizerState<T>,
    num_classes: usize,
}

/// One minibatch of features with given and true labels.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a, T> {
    pub x: &'a Tensor<T>,
    pub given: &'a [usize],
    pub truth: &'a [usize],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses<T> {
    /// Amateur loss against the Expert's soft targets.
    pub amateur: T,
    /// Expert loss against the true labels.
    pub expert: T,
}

/// Stages of [`ExpertNetModel::train_step_observed`], in emission order.
#[derive(Debug)]
pub enum StepEvent<'a, T> {
    AmateurPredicted { probs: &'a Tensor<T> },
    Concatenated { expert_input: &'a Tensor<T> },
    ExpertUpdated { input: &'a Tensor<T>, targets: &'a Tensor<T>, loss: T },
    ExpertPredicted { probs: &'a Tensor<T> },
    AmateurUpdated { targets: &'a Tensor<T>, loss: T },
}

pub trait StepObserver<T> {
    fn observe(&mut self, event: StepEvent<'_, T>, model: &ExpertNetModel<T>);
}

pub struct NoopObserver;

impl<T> StepObserver<T> for NoopObserver {
    fn observe(&mut self, _: StepEvent<'_, T>, _: &ExpertNetModel<T>) {}
}

fn check_distribution<T: Scalar>(probs: &[T]) -> Result<()> {
    let sum: T = probs.iter().copied().sum();
    if probs.iter().any(|&p| !(p >= T::zero() && p <= T::one())) || (sum - T::one()).abs() > T::sum_tolerance() {
        return Err(Error::data("amateur output is not a probability vector"));
    }
    Ok(())
}

/// `[probs ‖ onehot(given_label)]`, length 2K.
pub fn expert_input<T: Scalar>(probs: &[T], given_label: usize) -> Result<Vec<T>> {
    let k = probs.len();
    check_distribution(probs)?;
    if given_label >= k {
        return Err(Error::data(format!("given label {given_label} out of range for {k} classes")));
    }
    let mut z = Vec::with_capacity(2 * k);
    z.extend_from_slice(probs);
    z.extend((0..k).map(|c| if c == given_label { T::one() } else { T::zero() }));
    Ok(z)
}

/// Row-wise [`expert_input`].
pub fn expert_inputs<T: Scalar>(probs: &Tensor<T>, given: &[usize]) -> Result<Tensor<T>> {
    if probs.rows() != given.len() {
        return Err(Error::data(format!("{} probability rows for {} labels", probs.rows(), given.len())));
    }
    let k = probs.cols();
    let mut data = Vec::with_capacity(given.len() * 2 * k);
    for (row, &y) in probs.iter_rows().zip(given) {
        data.extend(expert_input(row, y)?);
    }
    Tensor::matrix(given.len(), 2 * k, data)
}

impl<T: Scalar> ExpertNetModel<T> {
    /// Fresh Amateur (`input_dim → … → K`, relu) and Expert (`2K → … → K`,
    /// leaky-relu), initialized from `seed`.
    pub fn new(input_dim: usize, num_classes: usize, config: &ExpertNetConfig<T>, seed: u64) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::config("need at least 2 classes"));
        }
        let mut rng_a = rng::derived_stream(seed, &[tag::INIT, 0]);
        let mut rng_e = rng::derived_stream(seed, &[tag::INIT, 1]);
        let amateur = Network::mlp(
            input_dim,
            &config.amateur_hidden,
            num_classes,
            Activation::Relu,
            Terminal::Softmax,
            &mut rng_a,
        )?;
        let terminal = match config.expert_terminal {
            ExpertTerminal::Softmax => Terminal::Softmax,
            ExpertTerminal::Sigmoid => Terminal::SigmoidNormalized,
        };
        let expert = Network::mlp(
            2 * num_classes,
            &config.expert_hidden,
            num_classes,
            Activation::leaky_relu(config.leaky_slope)?,
            terminal,
            &mut rng_e,
        )?;
        Self::from_networks(amateur, expert, config.amateur_opt, config.expert_opt)
    }

    pub fn from_networks(
        amateur: Network<T>,
        expert: Network<T>,
        amateur_opt: SgdConfig<T>,
        expert_opt: SgdConfig<T>,
    ) -> Result<Self> {
        let k = amateur.output_dim();
        if !amateur.is_classifier() || !expert.is_classifier() {
            return Err(Error::config("amateur and expert must end in a probability layer"));
        }
        if expert.input_dim() != 2 * k || expert.output_dim() != k {
            return Err(Error::dim(format!(
                "expert maps {} → {}, expected {} → {k}",
                expert.input_dim(),
                expert.output_dim(),
                2 * k
            )));
        }
        Ok(Self {
            amateur_opt: OptimizerState::new(&amateur, amateur_opt)?,
            expert_opt: OptimizerState::new(&expert, expert_opt)?,
            amateur,
            expert,
            num_classes: k,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.amateur.input_dim()
    }

    pub fn train_step(&mut self, batch: &Batch<'_, T>, lr: T) -> Result<StepLosses<T>> {
        self.train_step_observed(batch, lr, lr, &mut NoopObserver)
    }

    /// One alternating update with separate learning rates, reporting each
    /// stage to `observer`.
    pub fn train_step_observed(
        &mut self,
        batch: &Batch<'_, T>,
        amateur_lr: T,
        expert_lr: T,
        observer: &mut dyn StepObserver<T>,
    ) -> Result<StepLosses<T>> {
        let n = batch.x.rows();
        if batch.given.len() != n || batch.truth.len() != n {
            return Err(Error::data(format!(
                "batch has {n} rows, {} given and {} true labels",
                batch.given.len(),
                batch.truth.len()
            )));
        }
        let k = self.num_classes;

        let amateur_probs = self.amateur.predict(batch.x)?;
        observer.observe(StepEvent::AmateurPredicted { probs: &amateur_probs }, self);

        let z = expert_inputs(&amateur_probs, batch.given)?;
        observer.observe(StepEvent::Concatenated { expert_input: &z }, self);

        let truth = one_hot_rows::<T>(batch.truth, k)?;
        let expert_step = self.expert.gradients(&z, &truth, &LossKind::CrossEntropy)?;
        sgd_step(&mut self.expert, &expert_step.grads, &mut self.expert_opt, expert_lr)?;
        observer.observe(StepEvent::ExpertUpdated { input: &z, targets: &truth, loss: expert_step.loss }, self);

        let corrected = self.expert.predict(&z)?;
        observer.observe(StepEvent::ExpertPredicted { probs: &corrected }, self);

        let amateur_step = self.amateur.gradients(batch.x, &corrected, &LossKind::CrossEntropy)?;
        sgd_step(&mut self.amateur, &amateur_step.grads, &mut self.amateur_opt, amateur_lr)?;
        observer.observe(StepEvent::AmateurUpdated { targets: &corrected, loss: amateur_step.loss }, self);

        let losses = StepLosses { amateur: amateur_step.loss, expert: expert_step.loss };
        if !(losses.amateur.is_finite() && losses.expert.is_finite()) {
            return Err(Error::numeric(format!(
                "non-finite loss (amateur {}, expert {})",
                losses.amateur, losses.expert
            )));
        }
        Ok(losses)
    }

    /// Amateur class probabilities.
    pub fn amateur_probs(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.amateur.predict(x)
    }

    /// Expert class probabilities given features and given labels.
    pub fn full_probs(&self, x: &Tensor<T>, given: &[usize]) -> Result<Tensor<T>> {
        let z = expert_inputs(&self.amateur.predict(x)?, given)?;
        self.expert.predict(&z)
    }

    /// Argmax of the Amateur output, ties to the lowest class.
    pub fn infer_amateur(&self, x: &Tensor<T>) -> Result<Vec<usize>> {
        Ok(predictions(&self.amateur_probs(x)?))
    }

    /// Argmax of the Expert output on `[amateur(x) ‖ onehot(given)]`.
    pub fn infer_full(&self, x: &Tensor<T>, given: &[usize]) -> Result<Vec<usize>> {
        Ok(predictions(&self.full_probs(x, given)?))
    }
}
