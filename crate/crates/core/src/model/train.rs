//! Mini-batch training loop and evaluation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::network::ModelState;
use super::optim::{adam_step, LrSchedule};
use super::predict::argmax_rows;
use crate::data::{batch_order, BatchSource, LoadContext};
use crate::error::{Error, Result};
use crate::kernels::softmax_cross_entropy;
use crate::seed::{self, STREAM_DROPOUT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr0: f64,
    pub decay_rate: f64,
    /// Epochs between learning-rate decays.
    pub decay_step: usize,
    pub seed: u64,
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 100,
            lr0: 0.001,
            decay_rate: 0.95,
            decay_step: 1,
            seed: 0,
            augment: true,
        }
    }
}

impl TrainConfig {
    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            initial: self.lr0,
            decay_rate: self.decay_rate,
            decay_step: self.decay_step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be >= 1".into()));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return Err(Error::Config(format!(
                "train.decay_rate must be in (0, 1], got {}",
                self.decay_rate
            )));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!(
                "train.lr0 must be positive, got {}",
                self.lr0
            )));
        }
        if self.decay_step == 0 {
            return Err(Error::Config("train.decay_step must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean train-phase loss over the epoch's batches, weighted by batch size.
    pub train_loss: f64,
    /// Train-phase accuracy of the predictions made while training.
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub const CSV_HEADER: &'static str = "epoch,lr,train_loss,train_acc,val_loss,val_acc";

    /// One row per epoch; floats use the shortest exact representation so
    /// identical runs produce identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch,
                r.lr,
                r.train_loss,
                r.train_acc,
                opt(r.val_loss),
                opt(r.val_acc)
            );
        }
        out
    }
}

fn check_source(source: &dyn BatchSource, classes: usize) -> Result<()> {
    if source.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let mut seen = vec![false; classes];
    for &l in source.labels() {
        if l >= classes {
            return Err(Error::Validation(format!(
                "label {l} outside {classes} classes"
            )));
        }
        seen[l] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Precondition(format!(
            "training set has no samples of class index {missing}"
        )));
    }
    Ok(())
}

/// One pass over `source` in a seeded shuffled order, with an optimizer step
/// per batch. Advances `state.epoch`.
pub fn train_epoch(
    state: &mut ModelState,
    source: &dyn BatchSource,
    config: &TrainConfig,
) -> Result<EpochRecord> {
    config.validate()?;
    check_source(source, state.spec.classes)?;
    let epoch = state.epoch;
    let schedule = config.schedule();
    let ctx = LoadContext {
        train: true,
        augment: config.augment,
        seed: config.seed,
        epoch,
    };
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let mut seen = 0usize;
    for (bi, indices) in batch_order(source.len(), config.batch_size, config.seed, epoch)
        .iter()
        .enumerate()
    {
        let batch = source.load(indices, &ctx)?;
        let labels = batch.one_hot(state.spec.classes)?;
        let dropout_seed =
            seed::derive_seed(config.seed, &[STREAM_DROPOUT, epoch as u64, bi as u64]);
        let (logits, cache) = state.forward_train(&batch.images, dropout_seed)?;
        let (loss, d_logits) = softmax_cross_entropy(&logits, &labels)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss at epoch {epoch}, batch {bi}"
            )));
        }
        let grads = state.backward(&cache, &d_logits)?;
        adam_step(state, &grads, &schedule, epoch)?;
        let n = batch.labels.len();
        loss_sum += loss * n as f64;
        seen += n;
        correct += argmax_rows(&logits)
            .iter()
            .zip(&batch.labels)
            .filter(|(p, a)| p == a)
            .count();
    }
    state.epoch += 1;
    Ok(EpochRecord {
        epoch,
        lr: schedule.lr(epoch),
        train_loss: loss_sum / seen as f64,
        train_acc: correct as f64 / seen as f64,
        val_loss: None,
        val_acc: None,
    })
}

/// Trains for `config.epochs` epochs, evaluating on `validation` after each
/// one when given.
pub fn fit(
    state: &mut ModelState,
    train: &dyn BatchSource,
    validation: Option<&dyn BatchSource>,
    config: &TrainConfig,
) -> Result<History> {
    config.validate()?;
    check_source(train, state.spec.classes)?;
    let mut history = History::default();
    for _ in 0..config.epochs {
        let mut record = train_epoch(state, train, config)?;
        if let Some(val) = validation {
            let eval = evaluate(state, val, config.batch_size)?;
            record.val_loss = Some(eval.loss);
            record.val_acc = Some(eval.accuracy);
        }
        log::info!(
            "epoch {} lr {:.6} loss {:.4} acc {:.4}",
            record.epoch,
            record.lr,
            record.train_loss,
            record.train_acc
        );
        history.epochs.push(record);
    }
    Ok(history)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub actual: Vec<usize>,
    pub predicted: Vec<usize>,
}

/// Inference-phase loss and accuracy over `source` in its stored order.
pub fn evaluate(
    state: &ModelState,
    source: &dyn BatchSource,
    batch_size: usize,
) -> Result<Evaluation> {
    if source.is_empty() {
        return Err(Error::Precondition("evaluation set is empty".into()));
    }
    let ctx = LoadContext {
        train: false,
        augment: false,
        seed: 0,
        epoch: 0,
    };
    let all: Vec<usize> = (0..source.len()).collect();
    let mut loss_sum = 0.0;
    let mut actual = Vec::with_capacity(source.len());
    let mut predicted = Vec::with_capacity(source.len());
    for indices in all.chunks(batch_size.max(1)) {
        let batch = source.load(indices, &ctx)?;
        let logits = state.forward_infer(&batch.images)?;
        let (loss, _) = softmax_cross_entropy(&logits, &batch.one_hot(state.spec.classes)?)?;
        loss_sum += loss * batch.labels.len() as f64;
        predicted.extend(argmax_rows(&logits));
        actual.extend(batch.labels);
    }
    let correct = actual
        .iter()
        .zip(&predicted)
        .filter(|(a, p)| a == p)
        .count();
    Ok(Evaluation {
        loss: loss_sum / actual.len() as f64,
        accuracy: correct as f64 / actual.len() as f64,
        actual,
        predicted,
    })
}
