//! Minimal layered feed-forward network engine.
//!
//! Networks are ordered stacks of [`Layer`]s over row-major batches. The
//! engine provides forward evaluation with cached activations, reverse-mode
//! gradients of a batch-mean loss, and SGD with momentum, weight decay and a
//! step learning-rate schedule.

pub mod gradcheck;
mod layer;
mod loss;
mod network;
mod optim;

pub use layer::{Activation, Dense, Layer};
pub use loss::{batch_loss, cross_entropy, softmax, LossKind};
pub use network::{ForwardPass, Gradients, LossAndGrads, Network, Terminal};
pub use optim::{sgd_step, LrSchedule, OptimizerState, SgdConfig};
