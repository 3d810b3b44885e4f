use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::early_stop::{EarlyStopper, StopDecision};
use crate::error::{Error, Result};
use crate::nn::{Params, Scalar};

/// Training hyperparameters shared by every system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Weight of the match loss in joint training.
    pub joint_lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 8,
            max_epochs: 200,
            patience: 5,
            seed: 0,
            joint_lambda: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config(
                "batch size, max epochs and patience must be at least 1".into(),
            ));
        }
        if !(self.joint_lambda >= 0.0 && self.joint_lambda.is_finite()) {
            return Err(Error::Config("joint lambda must be non-negative".into()));
        }
        Ok(())
    }
}

/// A model that can be fitted by [`fit`].
pub trait Trainable<T: Scalar>: Params<T> {
    type Sample;

    /// Forward and backward pass over `batch`; accumulates gradients and
    /// returns the mean loss.
    fn accumulate_gradients(&mut self, batch: &[&Self::Sample]) -> Result<f64>;

    /// Mean loss over `batch` without touching gradients.
    fn loss(&self, batch: &[&Self::Sample]) -> Result<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub stopped_early: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were restored.
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainingLog {
    pub fn stopped_early(&self) -> bool {
        self.epochs.last().is_some_and(|e| e.stopped_early)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "val_loss", "stopped_early"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.val_loss.to_string(),
                e.stopped_early.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

const EVAL_CHUNK: usize = 64;

/// Mean loss over `samples`, evaluated in fixed chunks.
pub fn mean_loss<T: Scalar, M: Trainable<T>>(model: &M, samples: &[M::Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Dataset("cannot evaluate an empty set".into()));
    }
    let mut total = 0.0;
    for chunk in samples.chunks(EVAL_CHUNK) {
        let refs: Vec<&M::Sample> = chunk.iter().collect();
        total += model.loss(&refs)? * chunk.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

/// Mini-batch Adam training with early stopping on the validation loss.
///
/// Batches are drawn from a per-epoch shuffle seeded by `config.seed`; the
/// last incomplete batch is kept. The parameters of the best validation
/// epoch are restored before returning.
pub fn fit<T: Scalar, M: Trainable<T>>(
    model: &mut M,
    train: &[M::Sample],
    val: &[M::Sample],
    config: &TrainConfig,
) -> Result<TrainingLog> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Dataset(format!(
            "training needs non-empty train and validation sets (got {} / {})",
            train.len(),
            val.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(AdamConfig::with_learning_rate(config.learning_rate));
    let mut stopper = EarlyStopper::new(config.patience);
    let mut log = TrainingLog::default();
    let mut best = model.snapshot();
    let mut order: Vec<usize> = (0..train.len()).collect();
    model.zero_grad();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut train_total = 0.0;
        for batch_idx in order.chunks(config.batch_size) {
            let batch: Vec<&M::Sample> = batch_idx.iter().map(|&i| &train[i]).collect();
            let loss = model.accumulate_gradients(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "training loss became {loss} in epoch {epoch}"
                )));
            }
            adam.step(model)?;
            train_total += loss * batch.len() as f64;
        }
        let train_loss = train_total / train.len() as f64;
        let val_loss = mean_loss(model, val)?;
        if !val_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "validation loss became {val_loss} in epoch {epoch}"
            )));
        }
        let decision = stopper.update(val_loss);
        if stopper.improved() {
            best = model.snapshot();
            log.best_epoch = epoch;
            log.best_val_loss = val_loss;
        }
        let stopped_early = decision == StopDecision::Stop;
        log::debug!("epoch {epoch}: train {train_loss:.5} val {val_loss:.5}");
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            stopped_early,
        });
        if stopped_early {
            break;
        }
    }
    model.restore(&best)?;
    Ok(log)
}
