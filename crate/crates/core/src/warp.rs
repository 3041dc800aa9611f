//! Sequence warping: MASK/KEEP/RAND corruption plus length-changing INSERT
//! and DROP, with legality repair and label alignment.
//!
//! A [`WarpPlan`] assigns at most one [`WarpOp`] to each position of the
//! original sequence. Applying it yields a [`WarpedExample`] whose
//! `input_ids`, `label_ids` and `predict_mask` are aligned to the warped
//! (possibly longer or shorter) sequence:
//!
//! ```text
//! original  a     b     c     d
//! plan            DROP        INSERT
//! input     a           c     r     d
//! label     .           b     [INS] .
//! predict   F           T     T     F
//! ```
//!
//! A plan is legal when no position directly after a DROP carries an op,
//! and the last position is not a DROP. Otherwise the token after the
//! dropped one would need two labels, or a dropped token would have no
//! successor to carry its label.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::textcore::{self, Vocab, INS, MASK, PAD, UNK};

/// Label stored at positions with `predict_mask == false`.
pub const IGNORE_LABEL: u32 = PAD;

const APPLY_STREAM: u64 = 0x000A_9917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum WarpOp {
    Mask,
    Keep,
    Rand,
    Insert,
    Drop,
}

impl WarpOp {
    pub const ALL: [WarpOp; 5] = [
        WarpOp::Mask,
        WarpOp::Keep,
        WarpOp::Rand,
        WarpOp::Insert,
        WarpOp::Drop,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            WarpOp::Mask => "MASK",
            WarpOp::Keep => "KEEP",
            WarpOp::Rand => "RAND",
            WarpOp::Insert => "INSERT",
            WarpOp::Drop => "DROP",
        }
    }
}

/// Probability of each op among selected positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportions {
    pub mask: f64,
    pub keep: f64,
    pub rand: f64,
    pub insert: f64,
    pub drop: f64,
}

impl Proportions {
    pub fn get(&self, op: WarpOp) -> f64 {
        match op {
            WarpOp::Mask => self.mask,
            WarpOp::Keep => self.keep,
            WarpOp::Rand => self.rand,
            WarpOp::Insert => self.insert,
            WarpOp::Drop => self.drop,
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        WarpOp::ALL.map(|op| self.get(op))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpConfig {
    pub p_select: f64,
    pub proportions: Proportions,
}

impl WarpConfig {
    /// BERT-style split: 80% MASK, 10% KEEP, 10% RAND.
    pub fn mlm() -> Self {
        WarpConfig {
            p_select: 0.15,
            proportions: Proportions {
                mask: 0.8,
                keep: 0.1,
                rand: 0.1,
                insert: 0.0,
                drop: 0.0,
            },
        }
    }

    /// Warped split: 60% MASK, 10% each of KEEP, RAND, INSERT, DROP.
    pub fn wlm() -> Self {
        WarpConfig {
            p_select: 0.15,
            proportions: Proportions {
                mask: 0.6,
                keep: 0.1,
                rand: 0.1,
                insert: 0.1,
                drop: 0.1,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_select) {
            return Err(Error::config(format!("p_select {} not in [0,1]", self.p_select)));
        }
        let props = self.proportions.as_array();
        for (op, p) in WarpOp::ALL.iter().zip(props) {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{} proportion {p} not in [0,1]", op.name())));
            }
        }
        let sum: f64 = props.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("warp proportions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    fn draw_op<R: Rng + ?Sized>(&self, rng: &mut R) -> WarpOp {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = WarpOp::Mask;
        for op in WarpOp::ALL {
            let p = self.proportions.get(op);
            if p <= 0.0 {
                continue;
            }
            last = op;
            acc += p;
            if u < acc {
                return op;
            }
        }
        last
    }
}

/// Op assignment over positions of the original sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarpPlan {
    pub seq_len: usize,
    pub ops: BTreeMap<usize, WarpOp>,
    pub rng_seed: u64,
}

impl WarpPlan {
    pub fn new(seq_len: usize, ops: impl IntoIterator<Item = (usize, WarpOp)>) -> Self {
        WarpPlan {
            seq_len,
            ops: ops.into_iter().collect(),
            rng_seed: 0,
        }
    }

    pub fn count(&self, op: WarpOp) -> usize {
        self.ops.values().filter(|&&o| o == op).count()
    }

    pub fn get(&self, pos: usize) -> Option<WarpOp> {
        self.ops.get(&pos).copied()
    }

    pub fn is_legal(&self) -> bool {
        is_legal(self)
    }

    /// Length of the warped sequence this plan produces.
    pub fn warped_len(&self) -> usize {
        self.seq_len + self.count(WarpOp::Insert) - self.count(WarpOp::Drop)
    }
}

/// Samples a plan without legality repair: each position is selected with
/// probability `p_select` and selected positions draw an op from the
/// configured proportions.
pub fn sample_raw_plan(seq_len: usize, config: &WarpConfig, seed: u64) -> WarpPlan {
    debug_assert!(config.validate().is_ok());
    let mut rng = seed::rng(seed);
    let mut ops = BTreeMap::new();
    for i in 0..seq_len {
        if rng.random::<f64>() < config.p_select {
            ops.insert(i, config.draw_op(&mut rng));
        }
    }
    WarpPlan {
        seq_len,
        ops,
        rng_seed: seed,
    }
}

/// Samples a plan and repairs it into a legal one.
pub fn sample_plan(seq_len: usize, config: &WarpConfig, seed: u64) -> WarpPlan {
    repair_plan(&sample_raw_plan(seq_len, config, seed))
}

/// Single left-to-right pass: the op following a DROP is removed, and a DROP
/// on the final position becomes a MASK. Ops outside `0..seq_len` are dropped.
pub fn repair_plan(plan: &WarpPlan) -> WarpPlan {
    let mut ops: BTreeMap<usize, WarpOp> = plan
        .ops
        .range(..plan.seq_len)
        .map(|(&i, &op)| (i, op))
        .collect();
    for i in 0..plan.seq_len {
        if ops.get(&i) == Some(&WarpOp::Drop) {
            ops.remove(&(i + 1));
        }
    }
    if let Some(last) = plan.seq_len.checked_sub(1) {
        if let Some(op) = ops.get_mut(&last) {
            if *op == WarpOp::Drop {
                *op = WarpOp::Mask;
            }
        }
    }
    WarpPlan {
        seq_len: plan.seq_len,
        ops,
        rng_seed: plan.rng_seed,
    }
}

pub fn is_legal(plan: &WarpPlan) -> bool {
    for (&i, &op) in &plan.ops {
        if i >= plan.seq_len {
            return false;
        }
        if op == WarpOp::Drop && (i + 1 == plan.seq_len || plan.ops.contains_key(&(i + 1))) {
            return false;
        }
    }
    true
}

/// Warped sequence with labels aligned to the warped positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarpedExample {
    pub input_ids: Vec<u32>,
    pub label_ids: Vec<u32>,
    pub predict_mask: Vec<bool>,
    pub original_ids: Vec<u32>,
    pub plan: WarpPlan,
}

impl WarpedExample {
    pub fn num_predictions(&self) -> usize {
        self.predict_mask.iter().filter(|&&p| p).count()
    }
}

fn random_word<R: Rng + ?Sized>(vocab: &Vocab, rng: &mut R) -> Result<u32> {
    let ids = vocab.word_ids();
    if ids.is_empty() {
        return Err(Error::config("vocabulary has no non-special tokens"));
    }
    Ok(rng.random_range(ids))
}

/// Applies a legal plan to `original_ids`.
///
/// UNK is accepted in the input; PAD, CLS, MASK and INS are not.
pub fn apply_plan<R: Rng + ?Sized>(
    original_ids: &[u32],
    plan: &WarpPlan,
    vocab: &Vocab,
    rng: &mut R,
) -> Result<WarpedExample> {
    if plan.seq_len != original_ids.len() {
        return Err(Error::LengthMismatch {
            expected: plan.seq_len,
            actual: original_ids.len(),
        });
    }
    if !is_legal(plan) {
        return Err(Error::IllegalPlan);
    }
    if let Some(&bad) = original_ids
        .iter()
        .find(|&&id| textcore::is_special(id) && id != UNK)
    {
        return Err(Error::SpecialInInput(bad));
    }

    let cap = plan.warped_len();
    let mut input_ids = Vec::with_capacity(cap);
    let mut label_ids = Vec::with_capacity(cap);
    let mut predict_mask = Vec::with_capacity(cap);
    let mut pending: Option<u32> = None;

    for (i, &tok) in original_ids.iter().enumerate() {
        let (input, label) = match plan.get(i) {
            None => (tok, None),
            Some(WarpOp::Mask) => (MASK, Some(tok)),
            Some(WarpOp::Keep) => (tok, Some(tok)),
            Some(WarpOp::Rand) => (random_word(vocab, rng)?, Some(tok)),
            Some(WarpOp::Insert) => {
                input_ids.push(random_word(vocab, rng)?);
                label_ids.push(INS);
                predict_mask.push(true);
                (tok, None)
            }
            Some(WarpOp::Drop) => {
                pending = Some(tok);
                continue;
            }
        };
        // Legality guarantees the carrier of a pending DROP label has no op.
        let label = label.or(pending.take());
        input_ids.push(input);
        label_ids.push(label.unwrap_or(IGNORE_LABEL));
        predict_mask.push(label.is_some());
    }
    debug_assert!(pending.is_none());

    Ok(WarpedExample {
        input_ids,
        label_ids,
        predict_mask,
        original_ids: original_ids.to_vec(),
        plan: plan.clone(),
    })
}

/// Samples a legal plan from `seed` and applies it. Random replacement
/// tokens come from a stream derived from the same seed.
pub fn warp(original_ids: &[u32], config: &WarpConfig, vocab: &Vocab, seed: u64) -> Result<WarpedExample> {
    config.validate()?;
    let plan = sample_plan(original_ids.len(), config, seed);
    let mut rng = seed::derived_rng(seed, APPLY_STREAM);
    apply_plan(original_ids, &plan, vocab, &mut rng)
}

/// Machine-readable preview record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreviewRecord {
    pub input_ids: Vec<u32>,
    pub label_ids: Vec<u32>,
    pub predict_mask: Vec<bool>,
    pub plan: WarpPlan,
}

impl From<&WarpedExample> for PreviewRecord {
    fn from(ex: &WarpedExample) -> Self {
        PreviewRecord {
            input_ids: ex.input_ids.clone(),
            label_ids: ex.label_ids.clone(),
            predict_mask: ex.predict_mask.clone(),
            plan: ex.plan.clone(),
        }
    }
}

/// Three-row, column-aligned rendering of input, label and predict flag.
pub fn render_preview(example: &WarpedExample, vocab: &Vocab) -> Result<String> {
    let mut cols: Vec<[String; 3]> = Vec::with_capacity(example.input_ids.len());
    for j in 0..example.input_ids.len() {
        let input = vocab.token(example.input_ids[j])?.to_string();
        let (label, flag) = if example.predict_mask[j] {
            (vocab.token(example.label_ids[j])?.to_string(), "T")
        } else {
            ("·".to_string(), "F")
        };
        cols.push([input, label, flag.to_string()]);
    }
    let mut out = String::new();
    for (row, name) in ["input", "label", "predict"].iter().enumerate() {
        let _ = write!(out, "{name:<8}|");
        for col in &cols {
            let width = col.iter().map(|s| s.chars().count()).max().unwrap_or(1);
            let cell = &col[row];
            let pad = width - cell.chars().count();
            let _ = write!(out, " {cell}{}", " ".repeat(pad));
        }
        out.push('\n');
    }
    Ok(out)
}
