//! Amateur/Expert co-training for classification under label noise.
//!
//! An *Amateur* network classifies samples from their features alone. An
//! *Expert* network receives the Amateur's class probabilities concatenated
//! with the one-hot given (possibly corrupted) label and predicts the true
//! class. Both are trained alternately on every minibatch: the Expert against
//! the true labels, then the Amateur against the Expert's corrected output.
//!
//! The crate also provides the small dense-network engine everything runs on
//! ([`nn`]), a label-noise engine ([`noise`]), dataset construction
//! ([`data`]), the baselines it is compared with ([`baselines`]) and a grid runner that
//! writes plot-ready CSV reports ([`harness`]).
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`). Transition
//! matrices are generic over [`Weight`], which also admits exact rationals.
//! The aliases below pin the common concrete choices.

// Validation uses `!(x > 0)` style checks so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod error;
pub mod expertnet;
pub mod harness;
pub mod nn;
pub mod noise;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::{Scalar, Weight};

pub type TensorF64 = tensor::Tensor<f64>;
pub type TensorF32 = tensor::Tensor<f32>;
pub type NetworkF64 = nn::Network<f64>;
pub type NetworkF32 = nn::Network<f32>;
pub type DatasetF64 = data::Dataset<f64>;
pub type DatasetF32 = data::Dataset<f32>;
pub type ExpertNetF64 = expertnet::ExpertNetModel<f64>;
pub type ExpertNetF32 = expertnet::ExpertNetModel<f32>;
pub type TransitionMatrixF64 = noise::TransitionMatrix<f64>;
/// Transition matrix over exact rationals; row sums are checked with zero tolerance.
pub type TransitionMatrixExact = noise::TransitionMatrix<num_rational::Rational64>;
