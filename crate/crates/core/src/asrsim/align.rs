//! Unit-cost Levenshtein alignment and WER decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "UPPERCASE")]
pub enum AlignmentOp {
    Match { r#ref: usize, hyp: usize },
    Sub { r#ref: usize, hyp: usize },
    Ins { hyp: usize },
    Del { r#ref: usize },
}

impl AlignmentOp {
    pub fn ref_index(self) -> Option<usize> {
        match self {
            AlignmentOp::Match { r#ref, .. } | AlignmentOp::Sub { r#ref, .. } | AlignmentOp::Del { r#ref } => Some(r#ref),
            AlignmentOp::Ins { .. } => None,
        }
    }

    pub fn hyp_index(self) -> Option<usize> {
        match self {
            AlignmentOp::Match { hyp, .. } | AlignmentOp::Sub { hyp, .. } | AlignmentOp::Ins { hyp } => Some(hyp),
            AlignmentOp::Del { .. } => None,
        }
    }

    pub fn cost(self) -> usize {
        match self {
            AlignmentOp::Match { .. } => 0,
            _ => 1,
        }
    }
}

/// Minimum edit distance alignment with unit costs. Traceback from the end
/// prefers MATCH/SUB, then DEL, then INS.
pub fn align<T: PartialEq>(r: &[T], h: &[T]) -> Vec<AlignmentOp> {
    let (n, m) = (r.len(), h.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        d[i * w] = i;
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(r[i - 1] != h[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = sub.min(del).min(ins);
        }
    }
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = r[i - 1] == h[j - 1];
            if here == d[(i - 1) * w + j - 1] + usize::from(!same) {
                i -= 1;
                j -= 1;
                ops.push(if same {
                    AlignmentOp::Match { r#ref: i, hyp: j }
                } else {
                    AlignmentOp::Sub { r#ref: i, hyp: j }
                });
                continue;
            }
        }
        if i > 0 && here == d[(i - 1) * w + j] + 1 {
            i -= 1;
            ops.push(AlignmentOp::Del { r#ref: i });
        } else {
            j -= 1;
            ops.push(AlignmentOp::Ins { hyp: j });
        }
    }
    ops.reverse();
    ops
}

pub fn distance(ops: &[AlignmentOp]) -> usize {
    ops.iter().map(|o| o.cost()).sum()
}

/// Checks that `ops` visits every ref index `0..n_ref` and every hyp index
/// `0..n_hyp` exactly once, in order.
pub fn check_ops(ops: &[AlignmentOp], n_ref: usize, n_hyp: usize) -> Result<()> {
    let (mut i, mut j) = (0, 0);
    for (k, op) in ops.iter().enumerate() {
        if let Some(r) = op.ref_index() {
            if r != i {
                return Err(Error::InconsistentAlignment(format!("op {k}: expected ref {i}, got {r}")));
            }
            i += 1;
        }
        if let Some(h) = op.hyp_index() {
            if h != j {
                return Err(Error::InconsistentAlignment(format!("op {k}: expected hyp {j}, got {h}")));
            }
            j += 1;
        }
    }
    if i != n_ref || j != n_hyp {
        return Err(Error::InconsistentAlignment(format!(
            "ops cover {i}/{n_ref} ref and {j}/{n_hyp} hyp tokens"
        )));
    }
    Ok(())
}

/// Rebuilds `(ref, hyp)` from the ops; MATCH and SUB must pair equal and
/// unequal tokens respectively.
pub fn replay<T: PartialEq + Clone>(ops: &[AlignmentOp], r: &[T], h: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    check_ops(ops, r.len(), h.len())?;
    let mut rr = Vec::with_capacity(r.len());
    let mut hh = Vec::with_capacity(h.len());
    for op in ops {
        match *op {
            AlignmentOp::Match { r#ref, hyp } | AlignmentOp::Sub { r#ref, hyp } => {
                let is_match = matches!(op, AlignmentOp::Match { .. });
                if (r[r#ref] == h[hyp]) != is_match {
                    return Err(Error::InconsistentAlignment(format!("{op:?} disagrees with tokens")));
                }
                rr.push(r[r#ref].clone());
                hh.push(h[hyp].clone());
            }
            AlignmentOp::Ins { hyp } => hh.push(h[hyp].clone()),
            AlignmentOp::Del { r#ref } => rr.push(r[r#ref].clone()),
        }
    }
    Ok((rr, hh))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignmentStats {
    pub n_ref: usize,
    pub n_ins: usize,
    pub n_del: usize,
    pub n_sub: usize,
    pub wer: f64,
}

impl AlignmentStats {
    pub fn from_counts(n_ref: usize, n_ins: usize, n_del: usize, n_sub: usize) -> Self {
        let errors = n_ins + n_del + n_sub;
        AlignmentStats {
            n_ref,
            n_ins,
            n_del,
            n_sub,
            wer: if n_ref == 0 { 0.0 } else { errors as f64 / n_ref as f64 },
        }
    }

    pub fn errors(&self) -> usize {
        self.n_ins + self.n_del + self.n_sub
    }

    pub fn ins_rate(&self) -> f64 {
        self.n_ins as f64 / self.n_ref as f64
    }

    pub fn del_rate(&self) -> f64 {
        self.n_del as f64 / self.n_ref as f64
    }

    pub fn sub_rate(&self) -> f64 {
        self.n_sub as f64 / self.n_ref as f64
    }

    /// Pooled counts; WER of the sum, not the mean of WERs.
    pub fn merge(&self, other: &Self) -> Self {
        Self::from_counts(
            self.n_ref + other.n_ref,
            self.n_ins + other.n_ins,
            self.n_del + other.n_del,
            self.n_sub + other.n_sub,
        )
    }
}

/// Error counts of an alignment against a reference of `n_ref` tokens.
pub fn wer(ops: &[AlignmentOp], n_ref: usize) -> Result<AlignmentStats> {
    if n_ref == 0 {
        return Err(Error::EmptyReference);
    }
    let n_hyp = ops.iter().filter(|o| o.hyp_index().is_some()).count();
    check_ops(ops, n_ref, n_hyp)?;
    let (mut ins, mut del, mut sub) = (0, 0, 0);
    for op in ops {
        match op {
            AlignmentOp::Ins { .. } => ins += 1,
            AlignmentOp::Del { .. } => del += 1,
            AlignmentOp::Sub { .. } => sub += 1,
            AlignmentOp::Match { .. } => {}
        }
    }
    Ok(AlignmentStats::from_counts(n_ref, ins, del, sub))
}
