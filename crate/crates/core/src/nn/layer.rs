use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Fully connected layer `y = x Wᵀ + b` with `W` stored out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    weight: Tensor<T>,
    bias: Tensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weight.shape().len() != 2 {
            return Err(Error::dim("dense weight must be a matrix"));
        }
        if bias.shape() != [weight.rows()] {
            return Err(Error::dim(format!("bias shape {:?} does not match {} outputs", bias.shape(), weight.rows())));
        }
        Ok(Self { weight, bias })
    }

    /// Glorot-uniform weights in ±sqrt(6 / (fan_in + fan_out)), zero bias.
    pub fn glorot<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let data = (0..input * output).map(|_| T::lit(rng.random_range(-limit..limit))).collect();
        Self {
            weight: Tensor::new(vec![output, input], data).expect("positive dims"),
            bias: Tensor::zeros(vec![output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn weight(&self) -> &Tensor<T> {
        &self.weight
    }

    pub fn bias(&self) -> &Tensor<T> {
        &self.bias
    }

    pub(crate) fn params_mut(&mut self) -> [&mut Tensor<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub(crate) fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        let (n, out, inp) = (x.rows(), self.output_dim(), self.input_dim());
        let w = self.weight.data();
        let b = self.bias.data();
        let mut y = Vec::with_capacity(n * out);
        for row in x.iter_rows() {
            for o in 0..out {
                let wr = &w[o * inp..(o + 1) * inp];
                let dot: T = wr.iter().zip(row).map(|(&a, &c)| a * c).sum();
                y.push(dot + b[o]);
            }
        }
        Tensor::matrix(n, out, y).expect("consistent dims")
    }

    /// Returns (dx, dW, db) for upstream gradient `dy`.
    pub(crate) fn backward(&self, x: &Tensor<T>, dy: &Tensor<T>) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
        let (out, inp) = (self.output_dim(), self.input_dim());
        let w = self.weight.data();
        let mut dw = vec![T::zero(); out * inp];
        let mut db = vec![T::zero(); out];
        let mut dx = vec![T::zero(); x.rows() * inp];
        for (b, (xr, gr)) in x.iter_rows().zip(dy.iter_rows()).enumerate() {
            let dxr = &mut dx[b * inp..(b + 1) * inp];
            for (o, &g) in gr.iter().enumerate() {
                db[o] += g;
                let dwr = &mut dw[o * inp..(o + 1) * inp];
                let wr = &w[o * inp..(o + 1) * inp];
                for i in 0..inp {
                    dwr[i] += g * xr[i];
                    dxr[i] += g * wr[i];
                }
            }
        }
        (
            Tensor::matrix(x.rows(), inp, dx).expect("consistent dims"),
            Tensor::matrix(out, inp, dw).expect("consistent dims"),
            Tensor::vector(db).expect("consistent dims"),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation<T> {
    Relu,
    LeakyRelu(T),
    Sigmoid,
    /// Row-wise softmax with max subtraction.
    Softmax,
    /// Row-wise division by the row sum; expects positive inputs.
    Normalize,
}

impl<T: Scalar> Activation<T> {
    pub fn leaky_relu(slope: T) -> Result<Self> {
        if !(slope > T::zero() && slope < T::one()) {
            return Err(Error::config(format!("leaky-relu slope {slope} outside (0, 1)")));
        }
        Ok(Activation::LeakyRelu(slope))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu(_) => "leaky-relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
            Activation::Normalize => "normalize",
        }
    }

    pub(crate) fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match *self {
            Activation::Relu => Ok(x.map(|v| v.max(T::zero()))),
            Activation::LeakyRelu(a) => Ok(x.map(|v| if v > T::zero() { v } else { a * v })),
            Activation::Sigmoid => Ok(x.map(|v| T::one() / (T::one() + (-v).exp()))),
            Activation::Softmax => {
                let mut y = x.clone();
                for r in 0..y.rows() {
                    let p = super::softmax(x.row(r))?;
                    y.row_mut(r).copy_from_slice(&p);
                }
                Ok(y)
            }
            Activation::Normalize => {
                let mut y = x.clone();
                for r in 0..y.rows() {
                    let row = y.row_mut(r);
                    let s: T = row.iter().copied().sum();
                    if !(s > T::zero()) || !s.is_finite() {
                        return Err(Error::numeric(format!("cannot normalize row with sum {s}")));
                    }
                    row.iter_mut().for_each(|v| *v = *v / s);
                }
                Ok(y)
            }
        }
    }

    /// Gradient w.r.t. the layer input given input `x`, output `y` and upstream `dy`.
    pub(crate) fn backward(&self, x: &Tensor<T>, y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
        let mut dx = dy.clone();
        match *self {
            Activation::Relu => {
                for (g, &v) in dx.data_mut().iter_mut().zip(x.data()) {
                    if v <= T::zero() {
                        *g = T::zero();
                    }
                }
            }
            Activation::LeakyRelu(a) => {
                for (g, &v) in dx.data_mut().iter_mut().zip(x.data()) {
                    if v <= T::zero() {
                        *g *= a;
                    }
                }
            }
            Activation::Sigmoid => {
                for (g, &s) in dx.data_mut().iter_mut().zip(y.data()) {
                    *g = *g * s * (T::one() - s);
                }
            }
            Activation::Softmax => {
                for r in 0..dx.rows() {
                    let (yr, gr) = (y.row(r), dy.row(r));
                    let inner: T = yr.iter().zip(gr).map(|(&p, &g)| p * g).sum();
                    for (k, d) in dx.row_mut(r).iter_mut().enumerate() {
                        *d = yr[k] * (gr[k] - inner);
                    }
                }
            }
            Activation::Normalize => {
                for r in 0..dx.rows() {
                    let (yr, gr) = (y.row(r), dy.row(r));
                    let s: T = x.row(r).iter().copied().sum();
                    let inner: T = yr.iter().zip(gr).map(|(&p, &g)| p * g).sum();
                    for (k, d) in dx.row_mut(r).iter_mut().enumerate() {
                        *d = (gr[k] - inner) / s;
                    }
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Dense(Dense<T>),
    Activation(Activation<T>),
}

impl<T: Scalar> Layer<T> {
    pub fn dense(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        Dense::new(weight, bias).map(Layer::Dense)
    }
}
