use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::network::{Gradients, Network};

/// Step decay: `base · factor^(floor(epoch / period))`; constant when `period` is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule<T> {
    pub base: T,
    pub factor: T,
    pub period: Option<usize>,
}

impl<T: Scalar> LrSchedule<T> {
    pub fn constant(base: T) -> Self {
        Self { base, factor: T::lit(0.1), period: None }
    }

    pub fn step(base: T, factor: T, period: usize) -> Self {
        Self { base, factor, period: Some(period) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base > T::zero()) {
            return Err(Error::config(format!("base learning rate {} must be positive", self.base)));
        }
        if !(self.factor > T::zero()) {
            return Err(Error::config("decay factor must be positive"));
        }
        if self.period == Some(0) {
            return Err(Error::config("decay period must be positive"));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> T {
        match self.period {
            Some(p) => self.base * self.factor.powi((epoch / p) as i32),
            None => self.base,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig<T> {
    pub momentum: T,
    pub weight_decay: T,
    pub schedule: LrSchedule<T>,
}

impl<T: Scalar> SgdConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.momentum >= T::zero() && self.momentum < T::one()) {
            return Err(Error::config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !(self.weight_decay >= T::zero()) {
            return Err(Error::config("weight decay must be nonnegative"));
        }
        self.schedule.validate()
    }
}

impl<T: Scalar> Default for SgdConfig<T> {
    fn default() -> Self {
        Self { momentum: T::lit(0.9), weight_decay: T::lit(1e-4), schedule: LrSchedule::constant(T::lit(0.01)) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub config: SgdConfig<T>,
    velocity: Vec<Tensor<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(net: &Network<T>, config: SgdConfig<T>) -> Result<Self> {
        config.validate()?;
        let velocity = net.parameters().iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
        Ok(Self { config, velocity })
    }

    pub fn velocity(&self) -> &[Tensor<T>] {
        &self.velocity
    }

    pub fn lr_at(&self, epoch: usize) -> T {
        self.config.schedule.lr_at(epoch)
    }
}

/// One SGD step: `v ← μ·v + (g + λ·θ)`, then `θ ← θ − lr·v`.
pub fn sgd_step<T: Scalar>(
    net: &mut Network<T>,
    grads: &Gradients<T>,
    state: &mut OptimizerState<T>,
    lr: T,
) -> Result<()> {
    if !(lr >= T::zero()) {
        return Err(Error::config(format!("learning rate {lr} must be nonnegative")));
    }
    let (mu, wd) = (state.config.momentum, state.config.weight_decay);
    let mut params = net.parameters_mut();
    if params.len() != grads.tensors.len() || params.len() != state.velocity.len() {
        return Err(Error::dim("parameter, gradient and velocity counts differ"));
    }
    for ((p, g), v) in params.iter().zip(&grads.tensors).zip(&state.velocity) {
        if p.shape() != g.shape() || p.shape() != v.shape() {
            return Err(Error::dim(format!(
                "parameter shape {:?}, gradient {:?}, velocity {:?}",
                p.shape(),
                g.shape(),
                v.shape()
            )));
        }
    }
    for ((p, g), v) in params.iter_mut().zip(&grads.tensors).zip(&mut state.velocity) {
        for ((w, &dg), vel) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vel = mu * *vel + (dg + wd * *w);
            *w -= lr * *vel;
        }
    }
    drop(params);
    net.bump_version();
    Ok(())
}
