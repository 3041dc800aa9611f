//! Joint fine-tuning with best-by-validation model selection.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::{SluDataset, SluLabels};
use super::metrics::{slu_metrics, SluMetrics};
use super::model::{Prediction, SluModel};
use crate::error::Result;
use crate::nnet::{AdamConfig, AdamState, Checkpoint, EncoderModel};
use crate::seed::{derive_seed, derived_rng, rng};
use crate::textcore::Vocab;

const HEAD_STREAM: u64 = 0x4845_4144;
const DROPOUT_STREAM: u64 = 0x4452_4f50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Train only the two heads.
    pub freeze_encoder: bool,
    /// Stop after this many epochs without a new best validation score.
    pub patience: Option<usize>,
}

impl FinetuneConfig {
    pub fn new(seed: u64) -> Self {
        FinetuneConfig {
            adam: AdamConfig::default(),
            epochs: 20,
            batch_size: 16,
            seed,
            freeze_encoder: false,
            patience: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val: SluMetrics,
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub model: SluModel<f32>,
    pub history: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_val: SluMetrics,
}

pub fn evaluate(model: &SluModel<f32>, ds: &SluDataset, vocab: &Vocab) -> Result<(SluMetrics, Vec<Prediction>)> {
    let preds = model.predict_dataset(ds, vocab)?;
    let pi: Vec<&str> = preds.iter().map(|p| p.intent.as_str()).collect();
    let pt: Vec<Vec<&str>> = preds.iter().map(|p| p.tags.iter().map(String::as_str).collect()).collect();
    let gi: Vec<&str> = ds.utterances.iter().map(|u| u.intent.as_str()).collect();
    let gt: Vec<Vec<&str>> = ds.utterances.iter().map(|u| u.tags.iter().map(String::as_str).collect()).collect();
    Ok((slu_metrics(&gi, &pi, &gt, &pt)?, preds))
}

/// Fine-tunes a pretrained encoder checkpoint on `train`, keeping the
/// parameters of the epoch with the best validation joint accuracy
/// (earliest wins ties). The checkpoint must match `vocab`.
pub fn finetune(
    pretrained: &Checkpoint,
    vocab: &Vocab,
    labels: &SluLabels,
    train: &SluDataset,
    val: &SluDataset,
    cfg: &FinetuneConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<FinetuneOutcome> {
    pretrained.check_vocab(vocab)?;
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(crate::Error::config("epochs and batch_size must be positive"));
    }
    let encoder = EncoderModel::from_checkpoint(pretrained)?;
    let mut model = SluModel::new(encoder, labels.clone(), &mut derived_rng(cfg.seed, HEAD_STREAM));
    let data = model.encode_dataset(train, vocab)?;
    if data.is_empty() {
        return Err(crate::Error::EmptyCorpus);
    }
    let mut adam = AdamState::new(cfg.adam, &model);
    let mut dropout_rng = derived_rng(cfg.seed, DROPOUT_STREAM);
    let mut order: Vec<usize> = (0..data.len()).collect();

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, SluMetrics, SluModel<f32>)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng(derive_seed(cfg.seed, epoch as u64)));
        let mut loss_sum = 0.0;
        let mut n_batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| data[i].clone()).collect();
            let (loss, grads) = model.loss_and_grad(&batch, Some(&mut dropout_rng), !cfg.freeze_encoder)?;
            adam.step(&mut model, &grads)?;
            loss_sum += loss;
            n_batches += 1;
        }
        let (val_metrics, _) = evaluate(&model, val, vocab)?;
        let m = EpochMetrics {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            val: val_metrics,
        };
        on_epoch(&m);
        history.push(m);
        let improved = best
            .as_ref()
            .is_none_or(|(_, b, _)| val_metrics.joint_accuracy > b.joint_accuracy);
        if improved {
            best = Some((epoch, val_metrics, model.clone()));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.0);
        if cfg.patience.is_some_and(|p| epoch - best_epoch >= p) {
            break;
        }
    }
    let (best_epoch, best_val, model) = best.expect("at least one epoch");
    Ok(FinetuneOutcome {
        model,
        history,
        best_epoch,
        best_val,
    })
}
