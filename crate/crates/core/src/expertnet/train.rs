use log::debug;

use super::model::{Batch, ExpertNetModel, NoopObserver};
use crate::data::{batch_digest, epoch_batches, Dataset};
use crate::error::{Error, Result};
use crate::harness::accuracy;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub steps: usize,
    /// Mean over batches of the Amateur (or single-network) loss.
    pub amateur_loss: f64,
    /// Mean over batches of the Expert loss; `None` for single-network methods.
    pub expert_loss: Option<f64>,
    pub amateur_accuracy: f64,
    pub full_accuracy: Option<f64>,
    pub batch_digest: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Runs `step` over the shuffled batches of every epoch and collects the
/// per-epoch records produced by `finish`.
pub(crate) fn run_epochs<T: Scalar, S>(
    state: &mut S,
    train_set: &Dataset<T>,
    config: &TrainConfig,
    mut step: impl FnMut(&mut S, usize, &Dataset<T>) -> Result<(f64, Option<f64>)>,
    mut finish: impl FnMut(&S, usize) -> Result<(f64, f64, Option<f64>)>,
) -> Result<TrainHistory> {
    config.validate()?;
    let mut history = TrainHistory::default();
    for epoch in 0..config.epochs {
        let batches = epoch_batches(train_set.len(), config.batch_size, config.seed, epoch)?;
        let (mut sum_a, mut sum_e, mut has_e) = (0.0, 0.0, false);
        for idx in &batches {
            let batch = train_set.select(idx)?;
            let (la, le) = step(state, epoch, &batch)?;
            sum_a += la;
            if let Some(le) = le {
                sum_e += le;
                has_e = true;
            }
        }
        let steps = batches.len();
        let (lr, amateur_accuracy, full_accuracy) = finish(state, epoch)?;
        let record = EpochRecord {
            epoch,
            lr,
            steps,
            amateur_loss: sum_a / steps as f64,
            expert_loss: has_e.then(|| sum_e / steps as f64),
            amateur_accuracy,
            full_accuracy,
            batch_digest: batch_digest(&batches),
        };
        debug!(
            "epoch {epoch}: lr {lr:.3e} loss_a {:.5} loss_e {:?} acc_a {:.4} acc_full {:?}",
            record.amateur_loss, record.expert_loss, record.amateur_accuracy, record.full_accuracy
        );
        history.epochs.push(record);
    }
    Ok(history)
}

impl<T: Scalar> ExpertNetModel<T> {
    /// Alternating training over seeded shuffles of `train_set`; both
    /// validation accuracies are recorded after every epoch.
    pub fn train(
        &mut self,
        train_set: &Dataset<T>,
        val_set: &Dataset<T>,
        config: &TrainConfig,
    ) -> Result<TrainHistory> {
        if train_set.dim() != self.input_dim() || val_set.dim() != self.input_dim() {
            return Err(Error::dim("dataset feature dimension does not match the amateur input"));
        }
        train_set.require_given()?;
        let val_given = val_set.require_given()?.to_vec();
        run_epochs(
            self,
            train_set,
            config,
            |m, epoch, batch| {
                let (lr_a, lr_e) = (m.amateur_opt.lr_at(epoch), m.expert_opt.lr_at(epoch));
                let b = Batch { x: batch.features(), given: batch.require_given()?, truth: batch.true_labels() };
                let losses = m.train_step_observed(&b, lr_a, lr_e, &mut NoopObserver)?;
                Ok((to_f64(losses.amateur), Some(to_f64(losses.expert))))
            },
            |m, epoch| {
                let acc_a = accuracy(&m.infer_amateur(val_set.features())?, val_set.true_labels())?;
                let acc_f = accuracy(&m.infer_full(val_set.features(), &val_given)?, val_set.true_labels())?;
                Ok((to_f64(m.amateur_opt.lr_at(epoch)), acc_a, Some(acc_f)))
            },
        )
    }
}

pub(crate) fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}
