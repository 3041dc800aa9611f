//! Masked / warped LM pretraining loop.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::loss::LmLoss;
use super::model::{EncoderModel, TokenBatch};
use crate::error::{Error, Result};
use crate::seed::{self, derive_seed, Rng};
use crate::textcore::Vocab;
use crate::warp::{self, WarpConfig, WarpedExample};

const VAL_STREAM: u64 = 0x7A1;
const DROPOUT_STREAM: u64 = 0xD20;
const SHUFFLE_STREAM: u64 = 0x5F0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Mlm,
    Wlm,
}

impl Objective {
    pub const ALL: [Objective; 2] = [Objective::Mlm, Objective::Wlm];

    pub fn warp_config(self) -> WarpConfig {
        match self {
            Objective::Mlm => WarpConfig::mlm(),
            Objective::Wlm => WarpConfig::wlm(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Mlm => "mlm",
            Objective::Wlm => "wlm",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlm" => Ok(Objective::Mlm),
            "wlm" => Ok(Objective::Wlm),
            other => Err(Error::config(format!("objective must be mlm or wlm, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub warp: WarpConfig,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after this many optimizer steps, if set.
    pub max_steps: Option<usize>,
}

impl PretrainConfig {
    pub fn new(objective: Objective, seed: u64) -> Self {
        PretrainConfig {
            warp: objective.warp_config(),
            adam: AdamConfig::default(),
            epochs: 10,
            batch_size: 16,
            seed,
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Mean training loss of the epoch; absent for the untrained evaluation.
    pub train_loss: Option<f64>,
    pub val_perplexity: f64,
    pub val_accuracy: f64,
    pub steps: usize,
}

/// Warps each sentence with its own derived seed. Sentences are truncated to
/// `max_len` before and after warping.
pub fn warp_sentences(
    sentences: &[Vec<u32>],
    config: &WarpConfig,
    vocab: &Vocab,
    seed: u64,
    max_len: usize,
) -> Result<Vec<WarpedExample>> {
    sentences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let s = &s[..s.len().min(max_len)];
            let mut ex = warp::warp(s, config, vocab, derive_seed(seed, i as u64))?;
            if ex.input_ids.len() > max_len {
                ex.input_ids.truncate(max_len);
                ex.label_ids.truncate(max_len);
                ex.predict_mask.truncate(max_len);
            }
            Ok(ex)
        })
        .collect()
}

/// Pads warped examples into a batch with flattened labels and mask.
pub fn collate(examples: &[&WarpedExample]) -> (TokenBatch, Vec<u32>, Vec<bool>) {
    let seqs: Vec<Vec<u32>> = examples.iter().map(|e| e.input_ids.clone()).collect();
    let batch = TokenBatch::from_sequences(&seqs);
    let mut labels = vec![0u32; batch.batch_size * batch.seq_len];
    let mut mask = vec![false; labels.len()];
    for (b, e) in examples.iter().enumerate() {
        let off = b * batch.seq_len;
        labels[off..off + e.label_ids.len()].copy_from_slice(&e.label_ids);
        mask[off..off + e.predict_mask.len()].copy_from_slice(&e.predict_mask);
    }
    (batch, labels, mask)
}

/// Loss over all predicted positions of `examples`, no dropout.
pub fn evaluate_lm(model: &EncoderModel<f32>, examples: &[WarpedExample], batch_size: usize) -> Result<LmLoss> {
    let mut total = LmLoss::default();
    for chunk in examples.chunks(batch_size.max(1)) {
        let refs: Vec<&WarpedExample> = chunk.iter().filter(|e| e.num_predictions() > 0).collect();
        if refs.is_empty() {
            continue;
        }
        let (batch, labels, mask) = collate(&refs);
        total.merge(&model.evaluate(&batch, &labels, &mask)?);
    }
    if total.n_predicted == 0 {
        return Err(Error::NoPredictions);
    }
    Ok(total)
}

/// One optimizer step on a batch. Returns `None` if the batch has nothing to predict.
pub fn train_step(
    model: &mut EncoderModel<f32>,
    adam: &mut AdamState<f32>,
    examples: &[&WarpedExample],
    dropout_rng: Option<&mut Rng>,
) -> Result<Option<LmLoss>> {
    let (batch, labels, mask) = collate(examples);
    match model.backward(&batch, &labels, &mask, dropout_rng) {
        Ok((stats, grads)) => {
            adam.step(model, &grads)?;
            Ok(Some(stats))
        }
        Err(Error::NoPredictions) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Trains `model` in place. Validation examples are warped once with a
/// fixed seed so epochs are comparable. The first report (epoch 0) is the
/// untrained model.
pub fn pretrain(
    model: &mut EncoderModel<f32>,
    vocab: &Vocab,
    train: &[Vec<u32>],
    val: &[Vec<u32>],
    cfg: &PretrainConfig,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<Vec<EpochReport>> {
    cfg.warp.validate()?;
    if cfg.batch_size == 0 {
        return Err(Error::config("batch_size must be positive"));
    }
    let max_len = model.config.max_len;
    let val_set = warp_sentences(val, &cfg.warp, vocab, derive_seed(cfg.seed, VAL_STREAM), max_len)?;
    let mut adam = AdamState::new(cfg.adam, &*model);
    let mut dropout_rng = seed::derived_rng(cfg.seed, DROPOUT_STREAM);
    let mut reports = Vec::with_capacity(cfg.epochs + 1);

    let initial = evaluate_lm(model, &val_set, cfg.batch_size)?;
    let report = EpochReport {
        epoch: 0,
        train_loss: None,
        val_perplexity: initial.perplexity(),
        val_accuracy: initial.accuracy(),
        steps: 0,
    };
    on_epoch(&report);
    reports.push(report);

    let mut steps = 0usize;
    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut seed::derived_rng(derive_seed(cfg.seed, SHUFFLE_STREAM), epoch as u64));
        let shuffled: Vec<Vec<u32>> = order.iter().map(|&i| train[i].clone()).collect();
        let examples = warp_sentences(&shuffled, &cfg.warp, vocab, derive_seed(cfg.seed, epoch as u64), max_len)?;

        let mut epoch_loss = LmLoss::default();
        for chunk in examples.chunks(cfg.batch_size) {
            if cfg.max_steps.is_some_and(|m| steps >= m) {
                break;
            }
            let refs: Vec<&WarpedExample> = chunk.iter().collect();
            if let Some(stats) = train_step(model, &mut adam, &refs, Some(&mut dropout_rng))? {
                epoch_loss.merge(&stats);
                steps += 1;
            }
        }
        let val_loss = evaluate_lm(model, &val_set, cfg.batch_size)?;
        let report = EpochReport {
            epoch,
            train_loss: (epoch_loss.n_predicted > 0).then(|| epoch_loss.loss()),
            val_perplexity: val_loss.perplexity(),
            val_accuracy: val_loss.accuracy(),
            steps,
        };
        on_epoch(&report);
        reports.push(report);
        if cfg.max_steps.is_some_and(|m| steps >= m) {
            break;
        }
    }
    Ok(reports)
}
