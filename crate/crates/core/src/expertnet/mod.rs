//! Amateur/Expert co-training.
//!
//! The Amateur maps features to class probabilities. The Expert maps the
//! Amateur's probabilities concatenated with the one-hot given label to
//! corrected class probabilities. Each minibatch runs, in order:
//!
//! 1. Amateur prediction on `x`;
//! 2. Expert input `z = [p_A ‖ onehot(y)]`, with `p_A` held constant;
//! 3. one SGD step on the Expert against the true labels;
//! 4. Expert prediction on `z` with the updated weights;
//! 5. one SGD step on the Amateur with that prediction as a soft target.
//!
//! Inference runs either on the Amateur alone or through both networks.

mod checkpoint;
mod model;
pub(crate) mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use model::{
    expert_input, expert_inputs, Batch, ExpertNetConfig, ExpertNetModel, ExpertTerminal, NoopObserver, StepEvent,
    StepLosses, StepObserver,
};
pub use train::{EpochRecord, TrainConfig, TrainHistory};
