//! Joint intent/slot model: encoder, an intent head on the CLS state and
//! a slot head on every other position.

use serde_json::json;

use super::data::{SluDataset, SluLabels, TaggedUtterance};
use crate::error::{Error, Result};
use crate::nnet::linalg::{self, argmax};
use crate::nnet::loss::cross_entropy_row;
use crate::nnet::{Checkpoint, CheckpointHeader, EncoderModel, Linear, Parameters, Scalar, Tensor, TokenBatch};
use crate::seed::Rng;
use crate::textcore::{Vocab, CLS};

pub const CHECKPOINT_KIND: &str = "slu";

/// `[CLS] tokens` ids with gold label indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedUtterance {
    pub ids: Vec<u32>,
    pub intent: usize,
    pub tags: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SluModel<F = f32> {
    pub encoder: EncoderModel<F>,
    pub intent_head: Linear<F>,
    pub slot_head: Linear<F>,
    pub labels: SluLabels,
}

/// Per-utterance outputs: intent logits and `[n_tokens × n_tags]` slot logits.
#[derive(Debug, Clone, PartialEq)]
pub struct SluOutput<F = f32> {
    pub intent_logits: Vec<F>,
    pub slot_logits: Vec<F>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub intent: String,
    pub tags: Vec<String>,
}

impl<F: Scalar> SluModel<F> {
    pub fn new(encoder: EncoderModel<F>, labels: SluLabels, rng: &mut Rng) -> Self {
        let d = encoder.d_model();
        SluModel {
            intent_head: Linear::new(d, labels.intents.len(), rng),
            slot_head: Linear::new(d, labels.tags.len(), rng),
            encoder,
            labels,
        }
    }

    pub fn cast<G: Scalar>(&self) -> SluModel<G> {
        SluModel {
            encoder: self.encoder.cast(),
            intent_head: self.intent_head.cast(),
            slot_head: self.slot_head.cast(),
            labels: self.labels.clone(),
        }
    }

    pub fn n_intents(&self) -> usize {
        self.labels.intents.len()
    }

    pub fn n_tags(&self) -> usize {
        self.labels.tags.len()
    }

    pub fn encode(&self, u: &TaggedUtterance, vocab: &Vocab) -> Result<EncodedUtterance> {
        let intent = self
            .labels
            .intents
            .index(&u.intent)
            .ok_or_else(|| Error::config(format!("intent {:?} not in label set", u.intent)))?;
        let tags = u
            .tags
            .iter()
            .map(|t| {
                self.labels
                    .tags
                    .index(t)
                    .ok_or_else(|| Error::config(format!("tag {t:?} not in label set")))
            })
            .collect::<Result<_>>()?;
        Ok(EncodedUtterance {
            ids: u.input_ids(vocab),
            intent,
            tags,
        })
    }

    pub fn encode_dataset(&self, ds: &SluDataset, vocab: &Vocab) -> Result<Vec<EncodedUtterance>> {
        ds.utterances.iter().map(|u| self.encode(u, vocab)).collect()
    }

    fn run(&self, ids: &[u32], rng: Option<&mut Rng>) -> Result<(SluOutput<F>, Vec<F>, crate::nnet::SeqCache<F>)> {
        if ids.first() != Some(&CLS) {
            return Err(Error::MissingCls);
        }
        let positions: Vec<usize> = (0..ids.len()).collect();
        let (hidden, cache) = self.encoder.encode_sequence(ids, &positions, rng)?;
        let d = self.encoder.d_model();
        let out = SluOutput {
            intent_logits: self.intent_head.forward(&hidden[..d], 1),
            slot_logits: self.slot_head.forward(&hidden[d..], ids.len() - 1),
        };
        Ok((out, hidden, cache))
    }

    /// Outputs for one `[CLS] tokens` sequence, dropout off.
    pub fn forward_ids(&self, ids: &[u32]) -> Result<SluOutput<F>> {
        Ok(self.run(ids, None)?.0)
    }

    /// Batched forward. Every row must start with CLS. Returns intent logits
    /// `[B × n_intents]` and slot logits `[B × (T−1) × n_tags]`, the latter
    /// aligned to the non-CLS positions and zero at padding.
    pub fn slu_forward(&self, batch: &TokenBatch) -> Result<(Tensor<F>, Tensor<F>)> {
        let (ni, nt) = (self.n_intents(), self.n_tags());
        let width = batch.seq_len.saturating_sub(1);
        let mut intents = Tensor::zeros(&[batch.batch_size, ni]);
        let mut slots = Tensor::zeros(&[batch.batch_size, width, nt]);
        for b in 0..batch.batch_size {
            let (ids, pos) = batch.row(b);
            if pos.first() != Some(&0) {
                return Err(Error::MissingCls);
            }
            let out = self.forward_ids(&ids)?;
            intents.row_mut(b).copy_from_slice(&out.intent_logits);
            for (i, &t) in pos.iter().enumerate().skip(1) {
                slots
                    .row_mut(b * width + t - 1)
                    .copy_from_slice(&out.slot_logits[(i - 1) * nt..i * nt]);
            }
        }
        Ok((intents, slots))
    }

    /// Mean over utterances of the joint loss, without gradients.
    pub fn loss(&self, examples: &[EncodedUtterance]) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::NoPredictions);
        }
        let mut total = 0.0;
        for ex in examples {
            let out = self.forward_ids(&ex.ids)?;
            total += utterance_loss(&out, self.n_tags(), ex.intent, &ex.tags)?;
        }
        Ok(total / examples.len() as f64)
    }

    /// Mean joint loss over `examples` and its exact gradient. With
    /// `train_encoder == false` the encoder gradient stays zero.
    pub fn loss_and_grad(
        &self,
        examples: &[EncodedUtterance],
        mut rng: Option<&mut Rng>,
        train_encoder: bool,
    ) -> Result<(f64, Self)> {
        if examples.is_empty() {
            return Err(Error::NoPredictions);
        }
        let (ni, nt) = (self.n_intents(), self.n_tags());
        let d = self.encoder.d_model();
        let inv_b = F::one() / F::from_usize(examples.len()).unwrap();
        let mut grads = self.zeros_like();
        let mut total = 0.0;
        for ex in examples {
            let (out, hidden, cache) = self.run(&ex.ids, rng.as_deref_mut())?;
            total += utterance_loss(&out, nt, ex.intent, &ex.tags)?;
            let n_tok = ex.tags.len();

            let mut d_int = out.intent_logits;
            linalg::softmax_inplace(&mut d_int);
            d_int[ex.intent] -= F::one();
            d_int.iter_mut().for_each(|g| *g *= inv_b);
            debug_assert_eq!(d_int.len(), ni);

            let mut d_slot = out.slot_logits;
            if n_tok > 0 {
                let scale = inv_b / F::from_usize(n_tok).unwrap();
                for (row, &tag) in d_slot.chunks_mut(nt).zip(&ex.tags) {
                    linalg::softmax_inplace(row);
                    row[tag] -= F::one();
                    row.iter_mut().for_each(|g| *g *= scale);
                }
            }

            let mut dh = self.intent_head.backward(&hidden[..d], &d_int, 1, &mut grads.intent_head);
            dh.extend(self.slot_head.backward(&hidden[d..], &d_slot, n_tok, &mut grads.slot_head));
            if train_encoder {
                self.encoder.backward_sequence(&cache, &dh, &mut grads.encoder);
            }
        }
        Ok((total / examples.len() as f64, grads))
    }

    pub fn predict_ids(&self, ids: &[u32]) -> Result<(usize, Vec<usize>)> {
        let out = self.forward_ids(ids)?;
        let tags = out.slot_logits.chunks(self.n_tags()).map(argmax).collect();
        Ok((argmax(&out.intent_logits), tags))
    }

    pub fn predict(&self, u: &TaggedUtterance, vocab: &Vocab) -> Result<Prediction> {
        let (intent, tags) = self.predict_ids(&u.input_ids(vocab))?;
        Ok(Prediction {
            intent: self.labels.intents.label(intent).to_string(),
            tags: tags.into_iter().map(|t| self.labels.tags.label(t).to_string()).collect(),
        })
    }

    pub fn predict_dataset(&self, ds: &SluDataset, vocab: &Vocab) -> Result<Vec<Prediction>> {
        ds.utterances.iter().map(|u| self.predict(u, vocab)).collect()
    }
}

/// Intent cross-entropy plus mean slot cross-entropy of one utterance.
pub fn utterance_loss<F: Scalar>(out: &SluOutput<F>, n_tags: usize, intent: usize, tags: &[usize]) -> Result<f64> {
    if out.slot_logits.len() != tags.len() * n_tags {
        return Err(Error::LengthMismatch {
            expected: out.slot_logits.len() / n_tags.max(1),
            actual: tags.len(),
        });
    }
    if intent >= out.intent_logits.len() {
        return Err(Error::config(format!("intent index {intent} out of range")));
    }
    let (ce, _) = cross_entropy_row(&out.intent_logits, intent);
    let mut loss = ce.to_f64().unwrap();
    if !tags.is_empty() {
        let mut s = 0.0;
        for (row, &t) in out.slot_logits.chunks(n_tags).zip(tags) {
            if t >= n_tags {
                return Err(Error::config(format!("tag index {t} out of range")));
            }
            s += cross_entropy_row(row, t).0.to_f64().unwrap();
        }
        loss += s / tags.len() as f64;
    }
    Ok(loss)
}

/// Batched joint loss over the outputs of [`SluModel::slu_forward`]; the
/// length of each gold tag sequence decides which slot rows count.
pub fn slu_loss<F: Scalar>(
    intent_logits: &Tensor<F>,
    slot_logits: &Tensor<F>,
    gold_intents: &[usize],
    gold_tags: &[Vec<usize>],
) -> Result<f64> {
    let b = gold_intents.len();
    if b == 0 || gold_tags.len() != b || intent_logits.shape()[0] != b || slot_logits.shape()[0] != b {
        return Err(Error::LengthMismatch {
            expected: intent_logits.shape()[0],
            actual: b,
        });
    }
    let width = slot_logits.shape()[1];
    let nt = slot_logits.row_len();
    let mut total = 0.0;
    for i in 0..b {
        if gold_tags[i].len() > width {
            return Err(Error::LengthMismatch {
                expected: width,
                actual: gold_tags[i].len(),
            });
        }
        let start = i * width * nt;
        let out = SluOutput {
            intent_logits: intent_logits.row(i).to_vec(),
            slot_logits: slot_logits.data()[start..start + gold_tags[i].len() * nt].to_vec(),
        };
        total += utterance_loss(&out, nt, gold_intents[i], &gold_tags[i])?;
    }
    Ok(total / b as f64)
}

impl<F: Scalar> Parameters<F> for SluModel<F> {
    fn named_params(&self) -> Vec<(String, &Tensor<F>)> {
        let mut out = self.encoder.named_params();
        out.push(("intent_head.weight".into(), &self.intent_head.weight));
        out.push(("intent_head.bias".into(), &self.intent_head.bias));
        out.push(("slot_head.weight".into(), &self.slot_head.weight));
        out.push(("slot_head.bias".into(), &self.slot_head.bias));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<F>> {
        let mut out = self.encoder.params_mut();
        out.push(&mut self.intent_head.weight);
        out.push(&mut self.intent_head.bias);
        out.push(&mut self.slot_head.weight);
        out.push(&mut self.slot_head.bias);
        out
    }

    fn zeros_like(&self) -> Self {
        SluModel {
            encoder: self.encoder.zeros_like(),
            intent_head: self.intent_head.zeros_like(),
            slot_head: self.slot_head.zeros_like(),
            labels: self.labels.clone(),
        }
    }

    fn frozen_rows(&self) -> Vec<(usize, usize)> {
        self.encoder.frozen_rows()
    }
}

impl SluModel<f32> {
    pub fn to_checkpoint(&self, vocab_hash: &str, objective: Option<&str>) -> Checkpoint {
        Checkpoint::from_params(
            CheckpointHeader {
                kind: CHECKPOINT_KIND.into(),
                config: self.encoder.config,
                vocab_hash: vocab_hash.to_string(),
                objective: objective.map(str::to_string),
                meta: json!({ "labels": self.labels }),
            },
            self,
        )
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.header.kind != CHECKPOINT_KIND {
            return Err(Error::Checkpoint(format!(
                "expected a {CHECKPOINT_KIND} checkpoint, found {:?}",
                ckpt.header.kind
            )));
        }
        let labels: SluLabels = serde_json::from_value(ckpt.header.meta["labels"].clone())
            .map_err(|e| Error::Checkpoint(format!("bad label metadata: {e}")))?;
        let encoder = EncoderModel::from_checkpoint(ckpt)?;
        let mut model = SluModel::new(encoder, labels, &mut crate::seed::rng(0));
        ckpt.load_into(&mut model)?;
        Ok(model)
    }
}
