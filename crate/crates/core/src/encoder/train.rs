use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EncoderConfig, EncoderInput, EncoderParams};
use crate::contactgen::ContactRecord;
use crate::error::{Error, Result};
use crate::nn::{bce_loss, AdamW, AdamWConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    pub seed: u64,
    /// Trailing fraction of the samples held out for validation.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            optimizer: AdamWConfig::default(),
            seed: 0,
            val_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::InvalidParameter("val_fraction must lie in [0, 1)".into()));
        }
        if !(self.optimizer.lr > 0.0) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Patch-level binary classification metrics at a 0.5 probability threshold.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub loss: f64,
    pub accuracy: f64,
    /// Zero when nothing is predicted positive.
    pub precision: f64,
    pub recall: f64,
    /// Mean of the true-positive and true-negative rates.
    pub balanced_accuracy: f64,
    pub n: usize,
    pub positives: usize,
}

impl ClassificationMetrics {
    pub fn from_logits(logits: &[f64], labels: &[bool]) -> Self {
        let (mut tp, mut tn, mut fp, mut fneg) = (0usize, 0usize, 0usize, 0usize);
        for (&z, &y) in logits.iter().zip(labels) {
            match (z > 0.0, y) {
                (true, true) => tp += 1,
                (false, false) => tn += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
            }
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let n = labels.len();
        let tpr = ratio(tp, tp + fneg);
        let tnr = ratio(tn, tn + fp);
        ClassificationMetrics {
            loss: bce_loss(logits, labels),
            accuracy: ratio(tp + tn, n),
            precision: ratio(tp, tp + fp),
            recall: tpr,
            balanced_accuracy: 0.5 * (tpr + tnr),
            n,
            positives: tp + fneg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub train: ClassificationMetrics,
    pub val: Option<ClassificationMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    pub n_train: usize,
    pub n_val: usize,
}

impl TrainReport {
    pub fn last(&self) -> Option<&EpochReport> {
        self.epochs.last()
    }
}

/// Converts records to centered encoder inputs with patch labels.
pub fn prepare_dataset(
    records: &[ContactRecord],
    cfg: &EncoderConfig,
) -> Result<Vec<(EncoderInput, Vec<bool>)>> {
    records
        .par_iter()
        .map(|r| EncoderInput::from_record(r, cfg))
        .collect()
}

const EVAL_CHUNK: usize = 64;

pub fn evaluate(
    params: &EncoderParams,
    samples: &[(EncoderInput, Vec<bool>)],
) -> Result<ClassificationMetrics> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut logits = Vec::new();
    let mut labels = Vec::new();
    for chunk in samples.chunks(EVAL_CHUNK) {
        let inputs: Vec<&EncoderInput> = chunk.iter().map(|(i, _)| i).collect();
        logits.extend(params.forward(&inputs).0);
        labels.extend(chunk.iter().flat_map(|(_, l)| l.iter().copied()));
    }
    Ok(ClassificationMetrics::from_logits(&logits, &labels))
}

/// Trains in place; see [`train_with`] for a per-epoch callback.
pub fn train(
    params: &mut EncoderParams,
    samples: &[(EncoderInput, Vec<bool>)],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    train_with(params, samples, cfg, |_| {})
}

/// Minibatch AdamW on mean patch BCE. The split is by index (trailing
/// samples validate) and each epoch reshuffles the training part.
pub fn train_with<F: FnMut(&EpochReport)>(
    params: &mut EncoderParams,
    samples: &[(EncoderInput, Vec<bool>)],
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainReport> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_val = (samples.len() as f64 * cfg.val_fraction).floor() as usize;
    let n_train = samples.len() - n_val;
    if n_train == 0 {
        return Err(Error::EmptyDataset);
    }
    let (train_set, val_set) = samples.split_at(n_train);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = AdamW::new(cfg.optimizer);
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut report = TrainReport {
        epochs: Vec::with_capacity(cfg.epochs),
        n_train,
        n_val,
    };
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut logits = Vec::with_capacity(n_train * params.cfg.patch.n_patches);
        let mut labels = Vec::with_capacity(logits.capacity());
        for batch in order.chunks(cfg.batch_size) {
            let inputs: Vec<&EncoderInput> = batch.iter().map(|&i| &train_set[i].0).collect();
            let lab: Vec<&[bool]> = batch.iter().map(|&i| train_set[i].1.as_slice()).collect();
            let (loss, z) = params.loss_and_grad(&inputs, &lab)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            opt.update(&mut params.tensors_mut());
            logits.extend(z);
            labels.extend(lab.iter().flat_map(|l| l.iter().copied()));
        }
        // running metrics over the epoch, computed with pre-update logits
        let train_m = ClassificationMetrics::from_logits(&logits, &labels);
        if !train_m.loss.is_finite() || !params.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: train_m.loss,
            });
        }
        let val = if val_set.is_empty() {
            None
        } else {
            Some(evaluate(params, val_set)?)
        };
        let r = EpochReport {
            epoch,
            train: train_m,
            val,
        };
        on_epoch(&r);
        report.epochs.push(r);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_counts() {
        let m = ClassificationMetrics::from_logits(
            &[1.0, -1.0, 2.0, -3.0],
            &[true, true, false, false],
        );
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 0.5);
        assert_eq!(m.positives, 2);
    }

    #[test]
    fn precision_without_positive_predictions_is_zero() {
        let m = ClassificationMetrics::from_logits(&[-1.0, -1.0], &[true, false]);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.balanced_accuracy, 0.5);
    }

    #[test]
    fn rejects_bad_config() {
        let c = TrainConfig {
            val_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
