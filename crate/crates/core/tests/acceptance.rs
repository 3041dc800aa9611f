//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! ```text
//! cargo test --release -p wlm --test acceptance
//! ```

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng as _;
use wlm::asrsim::{align, corrupt, distance, make_noisy_slu_set, wer, AlignmentStats, NoiseConfig};
use wlm::experiment::matrix::Setting;
use wlm::experiment::report::Metric;
use wlm::experiment::{cmd_experiment, RunConfig};
use wlm::nnet::{pretrain, EncoderModel, ModelConfig, Objective, Parameters, Tensor, TokenBatch};
use wlm::seed;
use wlm::slu::{conll_f1, intent_accuracy, iob, joint_accuracy, slu_metrics, tag_sequence_accuracy};
use wlm::slu::{SluDataset, TaggedUtterance};
use wlm::synth::{self, bundled};
use wlm::textcore::{Corpus, Vocab, FIRST_WORD_ID, INS};
use wlm::warp::{sample_plan, sample_raw_plan, warp, WarpConfig, WarpOp, WarpPlan};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn legal(plan: &WarpPlan) -> bool {
    (0..plan.seq_len).all(|i| {
        plan.get(i) != Some(WarpOp::Drop) || (i + 1 < plan.seq_len && plan.get(i + 1).is_none())
    })
}

fn warp_legality() -> Outcome {
    let start = Instant::now();
    let cfg = WarpConfig::wlm();
    let vocab = Vocab::from_words((0..500).map(|i| format!("w{i}")), true).unwrap();
    let mut rng = seed::rng(101);
    let (mut illegal, mut bad_len) = (0, 0);
    for k in 0..100_000u64 {
        let n = rng.random_range(1..=128);
        let ids: Vec<u32> = (0..n).map(|_| rng.random_range(vocab.word_ids())).collect();
        let ex = warp(&ids, &cfg, &vocab, k).unwrap();
        illegal += usize::from(!legal(&ex.plan));
        let (d, i) = (ex.plan.count(WarpOp::Drop), ex.plan.count(WarpOp::Insert));
        bad_len += usize::from(ex.input_ids.len() != n - d + i || ex.label_ids.len() != ex.input_ids.len());
    }
    let t = start.elapsed();
    check(
        illegal == 0 && bad_len == 0 && t < Duration::from_secs(30),
        format!("100000 plans: {illegal} illegal, {bad_len} length violations, {:.1}s", t.as_secs_f64()),
    )
}

fn operation_rates() -> Outcome {
    let cfg = WarpConfig::wlm();
    let target = cfg.proportions.as_array();
    let mut rng = seed::rng(102);
    let (mut positions, mut raw, mut repaired) = (0usize, [0usize; 5], [0usize; 5]);
    let mut k = 0u64;
    while positions < 1_000_000 {
        let n = rng.random_range(1..=128);
        let plan = sample_raw_plan(n, &cfg, k);
        let fixed = sample_plan(n, &cfg, k);
        for op in WarpOp::ALL {
            raw[op.index()] += plan.count(op);
            repaired[op.index()] += fixed.count(op);
        }
        positions += n;
        k += 1;
    }
    let rates = |c: &[usize; 5]| {
        let sel: usize = c.iter().sum();
        (sel as f64 / positions as f64, c.map(|x| x as f64 / sel as f64))
    };
    let (sel, props) = rates(&raw);
    let (sel_post, props_post) = rates(&repaired);
    let fmt = |p: [f64; 5]| {
        WarpOp::ALL.iter().map(|op| format!("{}={:.4}", op.name(), p[op.index()])).collect::<Vec<_>>().join(" ")
    };
    let ok = (sel - cfg.p_select).abs() <= 0.01 && props.iter().zip(&target).all(|(p, t)| (p - t).abs() <= 0.02);
    check(
        ok,
        format!(
            "{positions} positions, selected {sel:.4} [{}]; after repair {sel_post:.4} [{}]",
            fmt(props),
            fmt(props_post)
        ),
    )
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let cfg = ModelConfig { vocab_size: 50, d_model: 16, n_layers: 2, n_heads: 4, d_ff: 32, max_len: 8, dropout: 0.0 };
    let mut model = EncoderModel::<f64>::new(cfg, &mut seed::rng(21)).unwrap();
    let mut rng = seed::rng(22);
    for t in model.params_mut() {
        let noise = Tensor::<f64>::randn(t.shape(), 0.2, &mut rng);
        for (v, n) in t.data_mut().iter_mut().zip(noise.data()) {
            *v += n;
        }
    }
    let batch = TokenBatch::from_sequences(&[vec![5, 9, INS, 17, 33, 3], vec![40, 6, 12]]);
    let labels = vec![0, 21, INS, 0, 8, 30, 44, 0, 0, 0, 0, 0];
    let mask = vec![false, true, true, false, true, true, true, false, true, false, false, false];
    let res = common::check_lm_gradients(&model, &batch, &labels, &mask, 1e-3);
    let t = start.elapsed();
    check(
        res.max_rel_error < 1e-3 && t < Duration::from_secs(300),
        format!(
            "{} parameters, max relative error {:.2e}, {:.1}s",
            res.checked,
            res.max_rel_error,
            t.as_secs_f64()
        ),
    )
}

fn toy_data() -> (Vocab, Corpus, Corpus) {
    let vocab = Vocab::build(bundled::TOY_TRAIN, 1, usize::MAX, true).unwrap();
    let train = Corpus::from_text(&vocab, bundled::TOY_TRAIN, "toy_train.txt");
    let val = Corpus::from_text(&vocab, bundled::TOY_VAL, "toy_val.txt");
    (vocab, train, val)
}

fn frozen_ins_row() -> Outcome {
    let (vocab, train, val) = toy_data();
    let cfg = RunConfig { epochs: Some(100), max_steps: Some(500), ..RunConfig::default() };
    let mut model = EncoderModel::<f32>::new(cfg.model_config(vocab.len()).unwrap(), &mut seed::rng(41)).unwrap();
    let init = model.clone();
    let before: Vec<u32> = model.ins_embedding().iter().map(|x| x.to_bits()).collect();
    let reports = pretrain(&mut model, &vocab, &train.sentences, &val.sentences, &cfg.pretrain_config(Objective::Wlm).unwrap(), |_| {})
        .unwrap();
    let steps = reports.last().unwrap().steps;
    let after: Vec<u32> = model.ins_embedding().iter().map(|x| x.to_bits()).collect();
    let word = FIRST_WORD_ID as usize;
    let moved = model.params()[0].row(word) != init.params()[0].row(word);
    check(
        steps == 500 && before == after && moved,
        format!("{steps} WLM steps, INS row bit-identical: {}, word rows updated: {moved}", before == after),
    )
}

fn convergence() -> Outcome {
    let (vocab, train, val) = toy_data();
    let v = vocab.len() as f64;
    let cfg = RunConfig { epochs: Some(20), ..RunConfig::default() };
    let mut lines = Vec::new();
    let mut ok = true;
    for objective in Objective::ALL {
        let mut model = EncoderModel::<f32>::new(cfg.model_config(vocab.len()).unwrap(), &mut seed::rng(51)).unwrap();
        let reports =
            pretrain(&mut model, &vocab, &train.sentences, &val.sentences, &cfg.pretrain_config(objective).unwrap(), |_| {})
                .unwrap();
        let untrained = reports[0].val_perplexity;
        let threshold = 0.5 * untrained.min(v);
        let hit = reports.iter().find(|r| r.epoch > 0 && r.val_perplexity <= threshold);
        let last = reports.last().unwrap().val_perplexity;
        ok &= hit.is_some();
        lines.push(format!(
            "{objective}: V={v} untrained {untrained:.1}, halved at epoch {}, epoch 20 {last:.1}",
            hit.map_or("-".into(), |r| r.epoch.to_string())
        ));
    }
    check(ok, lines.join("; "))
}

fn random_word_utterance(rng: &mut seed::Rng, words: &[String]) -> TaggedUtterance {
    let n = rng.random_range(1..15);
    let tokens = (0..n).map(|_| words[rng.random_range(0..words.len())].clone()).collect();
    TaggedUtterance::new(tokens, common::random_tags(rng, n, true), "intent").unwrap()
}

fn aligner_and_transfer() -> Outcome {
    let (strings, dist) = common::bfs_edit_distances(b"abc", 6);
    let mut mismatches = 0;
    for (i, r) in strings.iter().enumerate() {
        for (j, h) in strings.iter().enumerate() {
            mismatches += usize::from(distance(&align(r, h)) != dist[i][j] as usize);
        }
    }
    let vocab = Vocab::build(bundled::PRETRAIN_TRAIN, 1, usize::MAX, true).unwrap();
    let words: Vec<String> = vocab.word_ids().map(|i| vocab.token(i).unwrap().to_string()).collect();
    let mut rng = seed::rng(61);
    let mut utts = synth::generate_dataset(&mut rng, 5000).utterances;
    utts.extend((0..5000).map(|_| random_word_utterance(&mut rng, &words)));
    let clean = SluDataset::new(utts);
    let mut invalid = 0;
    for (k, cfg) in [NoiseConfig::train_val(), NoiseConfig { p_sub: 0.3, p_del: 0.3, p_ins: 0.3 }].iter().enumerate() {
        let noisy = make_noisy_slu_set(&clean, cfg, &vocab, 62 + k as u64).unwrap();
        invalid += noisy.dataset.utterances.iter().filter(|u| !iob::is_valid(&u.tags)).count();
    }
    check(
        mismatches == 0 && invalid == 0,
        format!(
            "{} pairs, {mismatches} distance mismatches; {} transfers, {invalid} invalid IOB",
            strings.len() * strings.len(),
            2 * clean.len()
        ),
    )
}

fn wer_oracle() -> Outcome {
    let mut rng = seed::rng(71);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..30);
        let m = rng.random_range(0..40);
        let r: Vec<u8> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let h: Vec<u8> = (0..m).map(|_| rng.random_range(0..5)).collect();
        let s = wer(&align(&r, &h), n).unwrap();
        mismatches += usize::from(s.wer != common::suffix_edit_distance(&r, &h) as f64 / n as f64);
    }
    let vocab = Vocab::from_words((0..300).map(|i| format!("w{i}")), true).unwrap();
    let cfg = NoiseConfig::train_val();
    let mut total = AlignmentStats::default();
    for k in 0..1000u64 {
        let mut rng = seed::derived_rng(72, k);
        let x: Vec<u32> = (0..100).map(|_| rng.random_range(vocab.word_ids())).collect();
        let y = corrupt(&x, &cfg, &vocab, &mut rng).unwrap();
        total = total.merge(&wer(&align(&x, &y), x.len()).unwrap());
    }
    check(
        mismatches == 0 && total.n_ref >= 100_000 && (total.wer - 0.186).abs() <= 0.015,
        format!(
            "1000 pairs, {mismatches} mismatches; simulated WER {:.4} over {} tokens (sub {:.4} del {:.4} ins {:.4})",
            total.wer,
            total.n_ref,
            total.sub_rate(),
            total.del_rate(),
            total.ins_rate()
        ),
    )
}

fn metric_oracles() -> Outcome {
    let mut rng = seed::rng(81);
    let mut f1_mismatches = 0;
    for valid in [true, false] {
        for _ in 0..1000 {
            let n = rng.random_range(0..12);
            let g = vec![common::random_tags(&mut rng, n, true)];
            let p = vec![common::random_tags(&mut rng, n, valid)];
            let r = conll_f1(&g, &p).unwrap();
            f1_mismatches += usize::from((r.n_correct, r.n_predicted, r.n_gold) != common::brute_force_chunk_counts(&g, &p));
        }
    }
    let mut bound_violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..30);
        let gi: Vec<String> = (0..n).map(|_| format!("i{}", rng.random_range(0..3))).collect();
        let pi: Vec<String> = (0..n).map(|_| format!("i{}", rng.random_range(0..3))).collect();
        let gt: Vec<Vec<String>> = (0..n).map(|_| common::random_tags(&mut rng, 3, true)).collect();
        let pt: Vec<Vec<String>> =
            gt.iter().map(|g| if rng.random_bool(0.6) { g.clone() } else { common::random_tags(&mut rng, 3, false) }).collect();
        let j = joint_accuracy(&gi, &pi, &gt, &pt).unwrap();
        bound_violations +=
            usize::from(j > intent_accuracy(&gi, &pi).unwrap().min(tag_sequence_accuracy(&gt, &pt).unwrap()));
    }
    let [train, val, test] = synth::bundled_task().unwrap();
    let gold_perfect = [train, val, test].iter().all(|d| {
        let m = slu_metrics(&d.intents(), &d.intents(), &d.tag_sequences(), &d.tag_sequences()).unwrap();
        m.intent_accuracy == 1.0 && m.slot_f1 == 1.0 && m.joint_accuracy == 1.0
    });
    check(
        f1_mismatches == 0 && bound_violations == 0 && gold_perfect,
        format!(
            "2000 F1 pairs, {f1_mismatches} mismatches; 1000 evaluations, {bound_violations} joint-bound violations; \
             gold vs gold perfect: {gold_perfect}"
        ),
    )
}

fn experiment_matrix() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { out_dir: Some(dir.path().to_path_buf()), ..RunConfig::default() };
    let mut table = Vec::new();
    let report = cmd_experiment(&cfg, &mut table, |msg| eprintln!("    {msg}")).map_err(|e| e.to_string())?;
    println!("{}", String::from_utf8_lossy(&table));
    let mut failures = Vec::new();
    for objective in Objective::ALL {
        for metric in Metric::ALL {
            let cc = report.cell(objective, Setting::CleanClean, metric).map(|c| c.mean);
            let cn = report.cell(objective, Setting::CleanNoisy, metric).map(|c| c.mean);
            match (cc, cn) {
                (Some(a), Some(b)) if a >= b => {}
                _ => failures.push(format!("{objective} {}: clean-clean {cc:?} < clean-noisy {cn:?}", metric.header())),
            }
        }
    }
    let gaps: Vec<String> = report
        .significance()
        .iter()
        .filter(|t| t.metric == Metric::JointAcc && t.setting != Setting::CleanClean)
        .map(|t| format!("{} joint WLM-MLM {:+.2} (p={:.3})", t.setting, (t.wlm_minus_mlm * 1e8).round() / 1e6 + 0.0, t.p_value))
        .collect();
    let detail = format!(
        "{} runs in {:.0}s; {}; {}",
        report.runs.len(),
        start.elapsed().as_secs_f64(),
        if failures.is_empty() { "clean-clean >= clean-noisy on every metric".to_string() } else { failures.join(", ") },
        gaps.join(", ")
    );
    check(failures.is_empty() && report.runs.len() == 30, detail)
}

fn parameter_count() -> Outcome {
    let n = ModelConfig::full(30_000).param_count();
    check((50_000_000..=62_000_000).contains(&n), format!("{n} parameters"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("warp legality stress", warp_legality),
        ("operation-rate fidelity", operation_rates),
        ("gradient correctness", gradient_check),
        ("frozen INS embedding", frozen_ins_row),
        ("convergence sanity", convergence),
        ("aligner oracle equivalence", aligner_and_transfer),
        ("WER oracle", wer_oracle),
        ("metric oracles", metric_oracles),
        ("experiment matrix", experiment_matrix),
        ("parameter count", parameter_count),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(d) => println!("PASS {:2} {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:2} {name}: {d}", i + 1)
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
