use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::net::{predict_answer, Example, FeatureMode, Variant, VerifierModel};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplier applied every `decay_every` epochs.
    pub lr_decay: f64,
    pub decay_every: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub dropout: f64,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            learning_rate: 0.01,
            lr_decay: 0.5,
            decay_every: 10,
            max_epochs: 100,
            patience: 5,
            dropout: 0.5,
            hidden: 256,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0) || !(self.lr_decay > 0.0) {
            return bad("learning_rate and lr_decay must be positive");
        }
        if self.decay_every == 0 || self.max_epochs == 0 || self.hidden == 0 {
            return bad("decay_every, max_epochs and hidden must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi(((epoch - 1) / self.decay_every) as i32)
    }
}

/// What to build: language branch, image input and input widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub variant: Variant,
    pub features: FeatureMode,
    pub embed_dim: usize,
    pub image_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Running mean over the epoch's batches, dropout active.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainLog {
    pub fn write_tsv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "epoch\tlr\ttrain_loss\ttrain_acc\tval_loss\tval_acc")?;
        for e in &self.epochs {
            writeln!(
                out,
                "{}\t{:.6}\t{:.6}\t{:.4}\t{:.6}\t{:.4}",
                e.epoch, e.learning_rate, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy
            )?;
        }
        Ok(())
    }
}

/// Loss and accuracy without dropout.
pub fn evaluate_split(model: &VerifierModel, items: &[Example]) -> Result<(f64, f64)> {
    let probs = model.predict(items)?;
    let mut loss = 0.0;
    let mut correct = 0;
    for (p, ex) in probs.iter().zip(items) {
        loss -= p[ex.label].max(f64::MIN_POSITIVE).ln();
        if predict_answer(*p).label() == ex.label {
            correct += 1;
        }
    }
    let n = items.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Minibatch SGD with seeded per-epoch shuffling. Training stops once the
/// validation loss has failed to improve for `patience` consecutive epochs
/// (at the first failure when `patience` is 0); the best-validation
/// parameters are returned.
pub fn train(spec: ModelSpec, train_set: &[Example], val_set: &[Example], cfg: &TrainConfig) -> Result<(VerifierModel, TrainLog)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut model = VerifierModel::new(spec.variant, spec.features, spec.embed_dim, cfg.hidden, spec.image_dim, cfg.seed);
    model.dropout = cfg.dropout;
    let mut best = model.clone();
    let mut best_val = f64::INFINITY;
    let mut log = TrainLog::default();
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffle_rng = seed::derived_rng(cfg.seed, "train/shuffle");

    for epoch in 1..=cfg.max_epochs {
        let lr = cfg.learning_rate_at(epoch);
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train_set[i]).collect();
            let dropout_seed = seed::derive(cfg.seed, &format!("train/dropout/{epoch}/{bi}"));
            let (loss, grads, probs) = model.loss_gradients_probs(&batch, true, dropout_seed)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: format!("batch {bi} loss is {loss} at learning rate {lr}"),
                });
            }
            loss_sum += loss * batch.len() as f64;
            for (ex, p) in batch.iter().zip(probs.rows()) {
                correct += usize::from(predict_answer([p[0], p[1]]).label() == ex.label);
            }
            for ((_, w), (_, g)) in model.params.tensors_mut().into_iter().zip(grads.tensors()) {
                w.scaled_add(-lr, g);
            }
            if !model.params.all_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: format!("non-finite parameters after batch {bi}"),
                });
            }
        }
        let (val_loss, val_accuracy) = evaluate_split(&model, val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                message: format!("validation loss is {val_loss}"),
            });
        }
        let n = train_set.len() as f64;
        log.epochs.push(EpochLog {
            epoch,
            learning_rate: lr,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            val_loss,
            val_accuracy,
        });
        log::debug!(
            "epoch {epoch}: train loss {:.4} val loss {val_loss:.4} val acc {val_accuracy:.3}",
            loss_sum / n
        );
        if val_loss < best_val {
            best_val = val_loss;
            best = model.clone();
            log.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok((best, log))
}
