//! Intent accuracy, CoNLL chunk F1 and joint accuracy. All pure.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::iob::{self, Span};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SluMetrics {
    pub intent_accuracy: f64,
    pub slot_f1: f64,
    pub joint_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_correct: usize,
    pub n_predicted: usize,
    pub n_gold: usize,
}

impl Prf {
    /// 0 predicted and 0 gold chunks scores 1; any other empty
    /// denominator scores 0.
    pub fn from_counts(n_correct: usize, n_predicted: usize, n_gold: usize) -> Self {
        let (precision, recall, f1) = if n_predicted == 0 && n_gold == 0 {
            (1.0, 1.0, 1.0)
        } else {
            let p = ratio(n_correct, n_predicted);
            let r = ratio(n_correct, n_gold);
            let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            (p, r, f)
        };
        Prf {
            precision,
            recall,
            f1,
            n_correct,
            n_predicted,
            n_gold,
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { expected: a, actual: b });
    }
    Ok(())
}

fn nonempty(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::config("empty evaluation set"));
    }
    Ok(())
}

/// Micro-averaged chunk precision, recall and F1 over a set of utterances.
pub fn conll_f1<S: AsRef<str>, T: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<T>]) -> Result<Prf> {
    same_len(gold.len(), pred.len())?;
    let (mut correct, mut n_pred, mut n_gold) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        same_len(g.len(), p.len())?;
        let gs: HashSet<Span> = iob::spans(g).into_iter().collect();
        let ps = iob::spans(p);
        n_gold += gs.len();
        n_pred += ps.len();
        correct += ps.iter().filter(|s| gs.contains(s)).count();
    }
    Ok(Prf::from_counts(correct, n_pred, n_gold))
}

pub fn intent_accuracy<S: AsRef<str>, T: AsRef<str>>(gold: &[S], pred: &[T]) -> Result<f64> {
    same_len(gold.len(), pred.len())?;
    nonempty(gold.len())?;
    let hits = gold.iter().zip(pred).filter(|(g, p)| g.as_ref() == p.as_ref()).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Fraction of utterances whose whole tag sequence is correct.
pub fn tag_sequence_accuracy<S: AsRef<str>, T: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<T>]) -> Result<f64> {
    same_len(gold.len(), pred.len())?;
    nonempty(gold.len())?;
    let mut hits = 0;
    for (g, p) in gold.iter().zip(pred) {
        same_len(g.len(), p.len())?;
        if tags_equal(g, p) {
            hits += 1;
        }
    }
    Ok(hits as f64 / gold.len() as f64)
}

fn tags_equal<S: AsRef<str>, T: AsRef<str>>(g: &[S], p: &[T]) -> bool {
    g.iter().zip(p).all(|(a, b)| a.as_ref() == b.as_ref())
}

/// Fraction of utterances with the intent and every tag correct.
pub fn joint_accuracy<S: AsRef<str>, T: AsRef<str>>(
    gold_intents: &[S],
    pred_intents: &[T],
    gold_tags: &[Vec<S>],
    pred_tags: &[Vec<T>],
) -> Result<f64> {
    same_len(gold_intents.len(), pred_intents.len())?;
    same_len(gold_intents.len(), gold_tags.len())?;
    same_len(gold_tags.len(), pred_tags.len())?;
    nonempty(gold_intents.len())?;
    let mut hits = 0;
    for i in 0..gold_intents.len() {
        same_len(gold_tags[i].len(), pred_tags[i].len())?;
        if gold_intents[i].as_ref() == pred_intents[i].as_ref() && tags_equal(&gold_tags[i], &pred_tags[i]) {
            hits += 1;
        }
    }
    Ok(hits as f64 / gold_intents.len() as f64)
}

pub fn slu_metrics<S: AsRef<str>, T: AsRef<str>>(
    gold_intents: &[S],
    pred_intents: &[T],
    gold_tags: &[Vec<S>],
    pred_tags: &[Vec<T>],
) -> Result<SluMetrics> {
    Ok(SluMetrics {
        intent_accuracy: intent_accuracy(gold_intents, pred_intents)?,
        slot_f1: conll_f1(gold_tags, pred_tags)?.f1,
        joint_accuracy: joint_accuracy(gold_intents, pred_intents, gold_tags, pred_tags)?,
    })
}

/// Mean and sample standard deviation (n − 1 denominator; 0 for n < 2).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub n: usize,
    pub mean: SluMetrics,
    pub std: SluMetrics,
}

pub fn summarize(runs: &[SluMetrics]) -> MetricSummary {
    let col = |f: fn(&SluMetrics) -> f64| mean_std(&runs.iter().map(f).collect::<Vec<_>>());
    let (ia, ia_s) = col(|m| m.intent_accuracy);
    let (sf, sf_s) = col(|m| m.slot_f1);
    let (ja, ja_s) = col(|m| m.joint_accuracy);
    MetricSummary {
        n: runs.len(),
        mean: SluMetrics { intent_accuracy: ia, slot_f1: sf, joint_accuracy: ja },
        std: SluMetrics { intent_accuracy: ia_s, slot_f1: sf_s, joint_accuracy: ja_s },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn f1_examples() {
        let g = vec![v("B-X I-X O B-Y")];
        assert_eq!(conll_f1(&g, &g).unwrap().f1, 1.0);

        let r = conll_f1(&[v("B-X I-X O")], &[v("B-X O O")]).unwrap();
        assert_eq!((r.n_correct, r.precision, r.recall, r.f1), (0, 0.0, 0.0, 0.0));

        let r = conll_f1(&[v("B-X I-X O B-Y")], &[v("B-X I-X O O")]).unwrap();
        assert_eq!(r.precision, 1.0);
        assert_eq!(r.recall, 0.5);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_denominators() {
        let r = conll_f1(&[v("O O")], &[v("O O")]).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        let r = conll_f1(&[v("B-X O")], &[v("O O")]).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        let r = conll_f1(&[v("O O")], &[v("B-X O")]).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn length_mismatch_is_error() {
        assert!(conll_f1(&[v("O O")], &[v("O")]).is_err());
        assert!(conll_f1(&[v("O")], &Vec::<Vec<String>>::new()).is_err());
        assert!(intent_accuracy(&["a"], &["a", "b"]).is_err());
    }

    #[test]
    fn accuracies() {
        assert_eq!(intent_accuracy(&["a", "b"], &["a", "b"]).unwrap(), 1.0);
        assert_eq!(intent_accuracy(&["a", "b"], &["b", "a"]).unwrap(), 0.0);
        assert_eq!(intent_accuracy(&["a", "b", "c", "d"], &["a", "b", "c", "x"]).unwrap(), 0.75);

        let gi = ["a", "a", "b", "b"];
        let pi = ["a", "a", "b", "x"];
        let gt: Vec<Vec<&str>> = vec![vec!["O", "B-X"], vec!["O"], vec!["B-Y"], vec!["O"]];
        let pt: Vec<Vec<&str>> = vec![vec!["O", "B-X"], vec!["B-X"], vec!["B-Y"], vec!["O"]];
        // hits: utterance 0 and 2; 1 has a wrong tag, 3 a wrong intent
        assert_eq!(joint_accuracy(&gi, &pi, &gt, &pt).unwrap(), 0.5);
        assert_eq!(tag_sequence_accuracy(&gt, &pt).unwrap(), 0.75);
        assert_eq!(joint_accuracy(&gi, &gi, &gt, &gt).unwrap(), 1.0);
    }

    #[test]
    fn gold_vs_gold_is_perfect() {
        let gi = ["a", "b"];
        let gt = vec![vec!["B-X", "I-X"], vec!["O", "O"]];
        let m = slu_metrics(&gi, &gi, &gt, &gt).unwrap();
        assert_eq!(m, SluMetrics { intent_accuracy: 1.0, slot_f1: 1.0, joint_accuracy: 1.0 });
    }

    #[test]
    fn mean_and_sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(m, 3.0);
        assert!((s - 2.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[0.7]), (0.7, 0.0));
        let runs = [
            SluMetrics { intent_accuracy: 0.5, slot_f1: 0.2, joint_accuracy: 0.1 },
            SluMetrics { intent_accuracy: 1.0, slot_f1: 0.4, joint_accuracy: 0.3 },
        ];
        let sum = summarize(&runs);
        assert_eq!(sum.mean.intent_accuracy, 0.75);
        assert!((sum.std.joint_accuracy - 0.02f64.sqrt()).abs() < 1e-12);
    }
}
