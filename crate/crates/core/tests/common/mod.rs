//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use wlm::nnet::{EncoderModel, Parameters, TokenBatch};
use wlm::textcore::INS;

/// Outcome of a central-difference gradient comparison.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
    pub max_abs_analytic: f64,
}

/// Denominator floor for [`rel_error`]. Central differences in f64 with
/// step 1e-3 carry roundoff near `2.2e-16 * |loss| / 1e-3 ≈ 1e-12`, so
/// gradients that are exactly zero (for example attention key biases, to
/// which softmax is invariant) would otherwise compare 0 against noise.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

/// Relative error `|a - n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_ERROR_FLOOR)
}

/// Central-difference comparison of `analytic` against `loss` for every
/// parameter entry not excluded by `skip(param_index, entry)`.
pub fn check_gradients<P: Parameters<f64> + Clone>(
    model: &P,
    analytic: &P,
    loss: impl Fn(&P) -> f64,
    eps: f64,
    skip: impl Fn(usize, usize) -> bool,
) -> GradCheck {
    let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
    let analytic: Vec<Vec<f64>> = analytic.params().iter().map(|t| t.data().to_vec()).collect();
    let mut probe = model.clone();
    let mut out = GradCheck { max_rel_error: 0.0, worst: String::new(), checked: 0, max_abs_analytic: 0.0 };
    for (pi, name) in names.iter().enumerate() {
        for j in 0..analytic[pi].len() {
            if skip(pi, j) {
                continue;
            }
            let orig = probe.params()[pi].data()[j];
            probe.params_mut()[pi].data_mut()[j] = orig + eps;
            let plus = loss(&probe);
            probe.params_mut()[pi].data_mut()[j] = orig - eps;
            let minus = loss(&probe);
            probe.params_mut()[pi].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[pi][j];
            let err = rel_error(a, numeric);
            out.checked += 1;
            out.max_abs_analytic = out.max_abs_analytic.max(a.abs());
            if err > out.max_rel_error {
                out.max_rel_error = err;
                out.worst = format!("{name}[{j}] analytic={a:e} numeric={numeric:e}");
            }
        }
    }
    out
}

/// Compares the analytic gradient of the masked LM loss against central
/// finite differences, using only forward evaluations for the latter.
/// The INS input-embedding row is skipped: its analytic gradient is zeroed
/// on purpose and is asserted separately.
pub fn check_lm_gradients(
    model: &EncoderModel<f64>,
    batch: &TokenBatch,
    labels: &[u32],
    mask: &[bool],
    eps: f64,
) -> GradCheck {
    let (_, grads) = model.backward(batch, labels, mask, None).expect("backward");
    let width = model.config.d_model;
    check_gradients(
        model,
        &grads,
        |m| m.evaluate(batch, labels, mask).expect("eval").loss(),
        eps,
        |pi, j| pi == 0 && j / width == INS as usize,
    )
}

/// Edit distance as a shortest path: breadth-first search over all strings
/// of length `<= max_len` on `alphabet`, with one insertion, deletion or
/// substitution per edge. Returns `dist[a][b]` indexed by [`string_index`].
pub fn bfs_edit_distances(alphabet: &[u8], max_len: usize) -> (Vec<Vec<u8>>, Vec<Vec<u8>>) {
    let mut strings: Vec<Vec<u8>> = vec![Vec::new()];
    let mut layer: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &layer {
            for &c in alphabet {
                let mut t = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        strings.extend(next.iter().cloned());
        layer = next;
    }
    let index: std::collections::HashMap<Vec<u8>, usize> =
        strings.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    let neighbours: Vec<Vec<usize>> = strings
        .iter()
        .map(|s| {
            let mut out = Vec::new();
            for i in 0..s.len() {
                let mut t = s.clone();
                t.remove(i);
                out.push(index[&t]);
                for &c in alphabet {
                    if c != s[i] {
                        let mut t = s.clone();
                        t[i] = c;
                        out.push(index[&t]);
                    }
                }
            }
            if s.len() < max_len {
                for i in 0..=s.len() {
                    for &c in alphabet {
                        let mut t = s.clone();
                        t.insert(i, c);
                        out.push(index[&t]);
                    }
                }
            }
            out
        })
        .collect();
    let n = strings.len();
    let mut dist = vec![vec![u8::MAX; n]; n];
    for src in 0..n {
        let row = &mut dist[src];
        row[src] = 0;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &neighbours[u] {
                if row[v] == u8::MAX {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    (strings, dist)
}

/// Levenshtein distance by a suffix recurrence with two rolling rows,
/// written independently of the library aligner.
pub fn suffix_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (n, m) = (a.len(), b.len());
    let mut next: Vec<usize> = (0..=m).map(|j| m - j).collect();
    let mut cur = vec![0; m + 1];
    for i in (0..n).rev() {
        cur[m] = n - i;
        for j in (0..m).rev() {
            let keep = next[j + 1] + usize::from(a[i] != b[j]);
            cur[j] = keep.min(next[j] + 1).min(cur[j + 1] + 1);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    next[0]
}

/// Chunk count oracle: for every candidate `(start, end, type)` decide from
/// the definition whether it is a chunk, then match gold and predicted
/// candidates pairwise. Returns `(correct, predicted, gold)`.
pub fn brute_force_chunk_counts(gold: &[Vec<String>], pred: &[Vec<String>]) -> (usize, usize, usize) {
    fn kind(t: &str) -> (char, &str) {
        if t == "O" {
            ('O', "")
        } else {
            (t.as_bytes()[0] as char, &t[2..])
        }
    }
    fn starts(tags: &[String], i: usize) -> Option<&str> {
        let (p, x) = kind(&tags[i]);
        match p {
            'B' => Some(x),
            'I' if i == 0 || kind(&tags[i - 1]).1 != x => Some(x),
            _ => None,
        }
    }
    fn continues(tags: &[String], i: usize, x: &str) -> bool {
        i < tags.len() && kind(&tags[i]) == ('I', x)
    }
    fn chunks(tags: &[String]) -> Vec<(usize, usize, String)> {
        let mut out = Vec::new();
        for s in 0..tags.len() {
            let Some(x) = starts(tags, s) else { continue };
            for e in s..tags.len() {
                if (s + 1..=e).all(|k| continues(tags, k, x)) && !continues(tags, e + 1, x) {
                    out.push((s, e, x.to_string()));
                }
            }
        }
        out
    }
    let (mut c, mut p, mut g) = (0, 0, 0);
    for (gs, ps) in gold.iter().zip(pred) {
        let gc = chunks(gs);
        let pc = chunks(ps);
        g += gc.len();
        p += pc.len();
        c += pc.iter().filter(|x| gc.iter().any(|y| y == *x)).count();
    }
    (c, p, g)
}

/// Random tag sequence over two slot types; `valid` forces IOB2.
pub fn random_tags(rng: &mut wlm::seed::Rng, len: usize, valid: bool) -> Vec<String> {
    use rand::Rng as _;
    const POOL: [&str; 5] = ["O", "B-X", "I-X", "B-Y", "I-Y"];
    let tags: Vec<String> = (0..len).map(|_| POOL[rng.random_range(0..POOL.len())].to_string()).collect();
    if valid {
        wlm::slu::iob::repair(&tags)
    } else {
        tags
    }
}
