mod common;

use rand::Rng as _;
use wlm::seed;
use wlm::slu::{conll_f1, intent_accuracy, joint_accuracy, tag_sequence_accuracy};

fn pairs(seed: u64, valid: bool) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut rng = seed::rng(seed);
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for _ in 0..1000 {
        let n = rng.random_range(0..12);
        gold.push(common::random_tags(&mut rng, n, true));
        pred.push(common::random_tags(&mut rng, n, valid));
    }
    (gold, pred)
}

#[test]
fn conll_f1_matches_brute_force_per_utterance_and_pooled() {
    for (s, valid) in [(1, true), (2, false)] {
        let (gold, pred) = pairs(s, valid);
        for (g, p) in gold.iter().zip(&pred) {
            let r = conll_f1(std::slice::from_ref(g), std::slice::from_ref(p)).unwrap();
            let (c, np, ng) = common::brute_force_chunk_counts(std::slice::from_ref(g), std::slice::from_ref(p));
            assert_eq!((r.n_correct, r.n_predicted, r.n_gold), (c, np, ng), "{g:?} {p:?}");
        }
        let r = conll_f1(&gold, &pred).unwrap();
        let (c, np, ng) = common::brute_force_chunk_counts(&gold, &pred);
        let (pp, rr) = (c as f64 / np as f64, c as f64 / ng as f64);
        assert!((r.f1 - 2.0 * pp * rr / (pp + rr)).abs() < 1e-12);
        assert_eq!(conll_f1(&gold, &gold).unwrap().f1, 1.0);
    }
}

#[test]
fn joint_accuracy_is_bounded_by_components() {
    let mut rng = seed::rng(3);
    for _ in 0..200 {
        let n = rng.random_range(1..30);
        let gi: Vec<String> = (0..n).map(|_| format!("i{}", rng.random_range(0..3))).collect();
        let pi: Vec<String> = (0..n).map(|_| format!("i{}", rng.random_range(0..3))).collect();
        let gt: Vec<Vec<String>> = (0..n).map(|_| common::random_tags(&mut rng, 2, true)).collect();
        let pt: Vec<Vec<String>> = gt
            .iter()
            .map(|g| if rng.random_bool(0.5) { g.clone() } else { common::random_tags(&mut rng, 2, false) })
            .collect();
        let j = joint_accuracy(&gi, &pi, &gt, &pt).unwrap();
        let ia = intent_accuracy(&gi, &pi).unwrap();
        let ta = tag_sequence_accuracy(&gt, &pt).unwrap();
        assert!(j <= ia.min(ta));
        assert!((0.0..=1.0).contains(&j));
        assert_eq!(joint_accuracy(&gi, &pi, &gt, &pt).unwrap(), j);
    }
}
