//! Two-sample permutation test on the difference of means.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed;

/// Above this many label splits the test samples instead of enumerating.
pub const EXACT_LIMIT: u64 = 200_000;
const RESAMPLES: usize = 100_000;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationTest {
    /// `mean(b) − mean(a)`.
    pub difference: f64,
    pub p_value: f64,
    pub exact: bool,
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Visits every size-`k` subset of `0..n` as a membership mask.
fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[bool])) {
    fn rec(i: usize, left: usize, mask: &mut Vec<bool>, f: &mut impl FnMut(&[bool])) {
        if left == 0 {
            f(mask);
            return;
        }
        if mask.len() - i < left {
            return;
        }
        mask[i] = true;
        rec(i + 1, left - 1, mask, f);
        mask[i] = false;
        rec(i + 1, left, mask, f);
    }
    let mut mask = vec![false; n];
    rec(0, k, &mut mask, f);
}

/// Two-sided test of equal means: the p-value is the fraction of
/// relabelings whose absolute mean difference reaches the observed one.
/// Small samples are enumerated exactly; larger ones use a fixed-seed
/// Monte Carlo estimate `(1 + hits) / (1 + resamples)`.
pub fn permutation_test(a: &[f64], b: &[f64]) -> PermutationTest {
    assert!(!a.is_empty() && !b.is_empty(), "permutation test needs two non-empty samples");
    let observed = mean(b) - mean(a);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (n, na) = (pooled.len(), a.len());
    let total: f64 = pooled.iter().sum();
    let nb = (n - na) as f64;
    let diff_of = |sum_a: f64| (total - sum_a) / nb - sum_a / na as f64;
    let threshold = observed.abs() - TIE_TOL;

    if binomial(n as u64, na as u64) <= EXACT_LIMIT {
        let (mut hits, mut count) = (0u64, 0u64);
        for_each_subset(n, na, &mut |mask| {
            let sum_a: f64 = pooled.iter().zip(mask).filter(|(_, &m)| m).map(|(x, _)| x).sum();
            count += 1;
            if diff_of(sum_a).abs() >= threshold {
                hits += 1;
            }
        });
        return PermutationTest {
            difference: observed,
            p_value: hits as f64 / count as f64,
            exact: true,
        };
    }
    let mut rng = seed::rng(0x5045_524d);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut hits = 0usize;
    for _ in 0..RESAMPLES {
        idx.shuffle(&mut rng);
        let sum_a: f64 = idx[..na].iter().map(|&i| pooled[i]).sum();
        if diff_of(sum_a).abs() >= threshold {
            hits += 1;
        }
    }
    PermutationTest {
        difference: observed,
        p_value: (1 + hits) as f64 / (1 + RESAMPLES) as f64,
        exact: false,
    }
}
