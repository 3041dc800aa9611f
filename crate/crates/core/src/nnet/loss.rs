use serde::{Deserialize, Serialize};

use super::linalg;
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Accumulated masked cross-entropy statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LmLoss {
    pub nll_sum: f64,
    pub n_correct: usize,
    pub n_predicted: usize,
}

impl LmLoss {
    pub fn add(&mut self, nll: f64, correct: bool) {
        self.nll_sum += nll;
        self.n_correct += usize::from(correct);
        self.n_predicted += 1;
    }

    pub fn merge(&mut self, other: &LmLoss) {
        self.nll_sum += other.nll_sum;
        self.n_correct += other.n_correct;
        self.n_predicted += other.n_predicted;
    }

    /// Mean negative log-likelihood over predicted positions.
    pub fn loss(&self) -> f64 {
        self.nll_sum / self.n_predicted as f64
    }

    pub fn accuracy(&self) -> f64 {
        self.n_correct as f64 / self.n_predicted as f64
    }

    pub fn perplexity(&self) -> f64 {
        perplexity(self.loss())
    }
}

/// `-log softmax(row)[label]` and whether `argmax(row) == label`.
pub fn cross_entropy_row<F: Scalar>(row: &[F], label: usize) -> (F, bool) {
    let nll = linalg::log_sum_exp(row) - row[label];
    (nll, linalg::argmax(row) == label)
}

/// Masked LM loss over logits `[.. × V]`; `labels` and `predict_mask` index
/// the leading cells.
pub fn lm_loss<F: Scalar>(logits: &Tensor<F>, labels: &[u32], predict_mask: &[bool]) -> Result<LmLoss> {
    let v = logits.row_len();
    let cells = logits.len() / v;
    if labels.len() != cells || predict_mask.len() != cells {
        return Err(Error::LengthMismatch {
            expected: cells,
            actual: labels.len().min(predict_mask.len()),
        });
    }
    let mut out = LmLoss::default();
    for c in 0..cells {
        if !predict_mask[c] {
            continue;
        }
        let label = labels[c] as usize;
        if label >= v {
            return Err(Error::UnknownId(labels[c]));
        }
        let (nll, correct) = cross_entropy_row(logits.row(c), label);
        out.add(nll.to_f64().unwrap(), correct);
    }
    if out.n_predicted == 0 {
        return Err(Error::NoPredictions);
    }
    Ok(out)
}

pub fn perplexity(mean_nll: f64) -> f64 {
    mean_nll.exp()
}
