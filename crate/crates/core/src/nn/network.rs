use rand::Rng;

use super::layer::{Activation, Dense, Layer};
use super::loss::{batch_loss, LossKind};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Output head appended after the last dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    /// Raw affine outputs.
    Linear,
    Softmax,
    /// Elementwise sigmoid, then each row rescaled to sum to one.
    SigmoidNormalized,
}

#[derive(Debug, Clone)]
pub struct Network<T> {
    layers: Vec<Layer<T>>,
    input_dim: usize,
    output_dim: usize,
    version: u64,
}

impl<T: Scalar> PartialEq for Network<T> {
    /// Structural and parameter equality; the update counter is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.input_dim == other.input_dim && self.layers == other.layers
    }
}

/// Activations cached by a forward pass: the input followed by every layer output.
#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    pub activations: Vec<Tensor<T>>,
}

impl<T: Scalar> ForwardPass<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.activations.last().expect("forward pass holds the input")
    }

    pub fn into_output(mut self) -> Tensor<T> {
        self.activations.pop().expect("forward pass holds the input")
    }
}

/// Per-parameter gradients in [`Network::parameters`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn max_abs(&self) -> T {
        self.tensors.iter().flat_map(|t| t.data().iter()).fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct LossAndGrads<T> {
    pub loss: T,
    pub grads: Gradients<T>,
    pub output: Tensor<T>,
}

impl<T: Scalar> Network<T> {
    pub fn new(input_dim: usize, layers: Vec<Layer<T>>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::dim("network input dimension must be positive"));
        }
        let mut width = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            match layer {
                Layer::Dense(d) => {
                    if d.input_dim() != width {
                        return Err(Error::dim(format!(
                            "layer {i} expects {} inputs but receives {width}",
                            d.input_dim()
                        )));
                    }
                    width = d.output_dim();
                }
                Layer::Activation(Activation::LeakyRelu(a)) => {
                    Activation::leaky_relu(*a)?;
                }
                Layer::Activation(_) => {}
            }
        }
        Ok(Self { layers, input_dim, output_dim: width, version: 0 })
    }

    /// Multilayer perceptron: dense layers through `hidden` widths with
    /// `hidden_activation` between them, then `terminal`.
    pub fn mlp<R: Rng>(
        input: usize,
        hidden: &[usize],
        output: usize,
        hidden_activation: Activation<T>,
        terminal: Terminal,
        rng: &mut R,
    ) -> Result<Self> {
        if hidden.contains(&0) || output == 0 {
            return Err(Error::config("layer widths must be positive"));
        }
        let mut layers = Vec::new();
        let mut width = input;
        for &h in hidden {
            layers.push(Layer::Dense(Dense::glorot(width, h, rng)));
            layers.push(Layer::Activation(hidden_activation));
            width = h;
        }
        layers.push(Layer::Dense(Dense::glorot(width, output, rng)));
        match terminal {
            Terminal::Linear => {}
            Terminal::Softmax => layers.push(Layer::Activation(Activation::Softmax)),
            Terminal::SigmoidNormalized => {
                layers.push(Layer::Activation(Activation::Sigmoid));
                layers.push(Layer::Activation(Activation::Normalize));
            }
        }
        Self::new(input, layers)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Number of parameter updates applied so far.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn bump_version(&mut self) {
        self.version += 1;
    }

    /// True when the final layer emits probability rows.
    pub fn is_classifier(&self) -> bool {
        matches!(self.layers.last(), Some(Layer::Activation(Activation::Softmax | Activation::Normalize)))
    }

    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Dense(d) => Some([d.weight(), d.bias()]),
                Layer::Activation(_) => None,
            })
            .flatten()
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .filter_map(|l| match l {
                Layer::Dense(d) => Some(d.params_mut()),
                Layer::Activation(_) => None,
            })
            .flatten()
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    pub fn squared_param_norm(&self) -> T {
        self.parameters().iter().map(|p| p.squared_norm()).sum()
    }

    pub fn forward(&self, batch: &Tensor<T>) -> Result<ForwardPass<T>> {
        if batch.shape().len() != 2 || batch.cols() != self.input_dim {
            return Err(Error::dim(format!(
                "batch shape {:?} does not match network input {}",
                batch.shape(),
                self.input_dim
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(batch.clone());
        for layer in &self.layers {
            let x = activations.last().expect("non-empty");
            let y = match layer {
                Layer::Dense(d) => d.forward(x),
                Layer::Activation(a) => a.forward(x)?,
            };
            activations.push(y);
        }
        let pass = ForwardPass { activations };
        pass.output().ensure_finite("network output")?;
        Ok(pass)
    }

    pub fn predict(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward(batch).map(ForwardPass::into_output)
    }

    /// Back-propagates `d_output` (gradient of the loss w.r.t. the network
    /// output) through a cached pass.
    pub fn backward(&self, pass: &ForwardPass<T>, d_output: &Tensor<T>) -> Result<Gradients<T>> {
        if pass.activations.len() != self.layers.len() + 1 {
            return Err(Error::dim("forward pass does not belong to this network"));
        }
        if d_output.shape() != pass.output().shape() {
            return Err(Error::dim("output gradient shape mismatch"));
        }
        let mut grads = Vec::new();
        let mut dy = d_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &pass.activations[i];
            let y = &pass.activations[i + 1];
            dy = match layer {
                Layer::Dense(d) => {
                    let (dx, dw, db) = d.backward(x, &dy);
                    grads.push(db);
                    grads.push(dw);
                    dx
                }
                Layer::Activation(a) => a.backward(x, y, &dy),
            };
        }
        grads.reverse();
        Ok(Gradients { tensors: grads })
    }

    /// Mean batch loss and its gradient w.r.t. every parameter.
    pub fn gradients(&self, batch: &Tensor<T>, targets: &Tensor<T>, loss: &LossKind<T>) -> Result<LossAndGrads<T>> {
        let pass = self.forward(batch)?;
        let (value, d_out) = batch_loss(loss, pass.output(), targets)?;
        let grads = self.backward(&pass, &d_out)?;
        Ok(LossAndGrads { loss: value, grads, output: pass.into_output() })
    }

    /// Mean batch loss without gradients.
    pub fn loss(&self, batch: &Tensor<T>, targets: &Tensor<T>, loss: &LossKind<T>) -> Result<T> {
        let out = self.predict(batch)?;
        batch_loss(loss, &out, targets).map(|(v, _)| v)
    }
}
