//! Moving IOB tags from a reference transcript onto a noisy hypothesis.

use serde::{Deserialize, Serialize};

use super::align::{align, check_ops, wer, AlignmentOp, AlignmentStats};
use super::noise::{corrupt_with, random_word_except, NoiseConfig};
use crate::error::Result;
use crate::seed::derived_rng;
use crate::slu::iob::{self, OUTSIDE};
use crate::slu::{SluDataset, TaggedUtterance};
use crate::textcore::{Vocab, SPECIAL_LITERALS, UNK};

/// MATCH and SUB tokens inherit the reference tag, INS tokens get `O`,
/// deleted reference tags vanish, then orphan `I-X` tags become `B-X`.
pub fn transfer_labels(reference: &TaggedUtterance, hyp: &[String], ops: &[AlignmentOp]) -> Result<TaggedUtterance> {
    check_ops(ops, reference.len(), hyp.len())?;
    let mut tags = Vec::with_capacity(hyp.len());
    for op in ops {
        match *op {
            AlignmentOp::Match { r#ref, .. } | AlignmentOp::Sub { r#ref, .. } => tags.push(reference.tags[r#ref].clone()),
            AlignmentOp::Ins { .. } => tags.push(OUTSIDE.to_string()),
            AlignmentOp::Del { .. } => {}
        }
    }
    TaggedUtterance::new(hyp.to_vec(), iob::repair(&tags), reference.intent.clone())
}

/// Sidecar entry for one utterance of a noisy set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub utterance_id: usize,
    pub ops: Vec<AlignmentOp>,
    pub stats: AlignmentStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisySet {
    pub dataset: SluDataset,
    pub records: Vec<UtteranceRecord>,
    /// Pooled over all utterances.
    pub stats: AlignmentStats,
    /// Utterances whose hypothesis came out empty and was replaced by a
    /// single UNK token tagged `O`.
    pub n_fully_deleted: usize,
}

impl NoisySet {
    /// Sidecar as JSON lines, one record per utterance.
    pub fn sidecar_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        Ok(s)
    }
}

/// Corrupts every utterance of `clean` (utterance `i` uses the stream
/// `derive_seed(seed, i)`), aligns it to its clean form and transfers the
/// labels. Alignments and statistics describe the emitted hypotheses.
pub fn make_noisy_slu_set(clean: &SluDataset, cfg: &NoiseConfig, vocab: &Vocab, seed: u64) -> Result<NoisySet> {
    cfg.validate()?;
    if vocab.num_words() < 2 && (cfg.p_sub > 0.0 || cfg.p_ins > 0.0) {
        return Err(crate::Error::config("noise needs at least two vocabulary words"));
    }
    let word = |id: u32| vocab.token(id).map(str::to_string).expect("word id");
    let mut utterances = Vec::with_capacity(clean.len());
    let mut records = Vec::with_capacity(clean.len());
    let mut total = AlignmentStats::default();
    let mut n_fully_deleted = 0;
    for (i, u) in clean.utterances.iter().enumerate() {
        let mut rng = derived_rng(seed, i as u64);
        let mut hyp = corrupt_with(
            &u.tokens,
            cfg,
            &mut rng,
            |r| word(random_word_except(vocab, None, r)),
            |r, tok| {
                let id = vocab.id(tok);
                let avoid = (id != UNK).then_some(id);
                word(random_word_except(vocab, avoid, r))
            },
        );
        let fully_deleted = hyp.is_empty() && !u.is_empty();
        if fully_deleted {
            hyp.push(SPECIAL_LITERALS[UNK as usize].to_string());
            n_fully_deleted += 1;
        }
        let ops = align(&u.tokens, &hyp);
        let mut noisy = transfer_labels(u, &hyp, &ops)?;
        if fully_deleted {
            noisy.tags = vec![OUTSIDE.to_string()];
        }
        let stats = if u.is_empty() {
            AlignmentStats::from_counts(0, hyp.len(), 0, 0)
        } else {
            wer(&ops, u.len())?
        };
        total = total.merge(&stats);
        records.push(UtteranceRecord {
            utterance_id: i,
            ops,
            stats,
        });
        utterances.push(noisy);
    }
    Ok(NoisySet {
        dataset: SluDataset::new(utterances),
        records,
        stats: total,
        n_fully_deleted,
    })
}
