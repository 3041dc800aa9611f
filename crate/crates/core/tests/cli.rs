use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::Value;
use wlm::experiment::{cmd_experiment, cmd_warp_preview, RunConfig};
use wlm::synth::bundled;

const TINY: &str = "d_model = 16\nn_layers = 1\nn_heads = 2\nd_ff = 32\nepochs = 1\nmax_steps = 4\n\
                    seeds = [0]\nft_epochs = 1\n";

fn wlm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wlm")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = wlm(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
        std::fs::write(dir.path().join("toy.txt"), bundled::TOY_TRAIN).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn vocab_hash_mismatch_is_refused() {
    let f = Fixture::new();
    let cfg = f.path("tiny.toml");
    ok(&["build-vocab", "--out", s(&f.path("big.vocab"))]);
    ok(&["build-vocab", "--corpus", s(&f.path("toy.txt")), "--out", s(&f.path("toy.vocab"))]);
    ok(&["pretrain", "--config", s(&cfg), "--vocab", s(&f.path("big.vocab")), "--out", s(&f.path("enc.ckpt"))]);

    let out = wlm(&[
        "finetune",
        "--config",
        s(&cfg),
        "--vocab",
        s(&f.path("toy.vocab")),
        "--checkpoint",
        s(&f.path("enc.ckpt")),
        "--out-dir",
        s(&f.path("ft")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: vocab hash mismatch"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn commands_are_byte_identical_under_a_fixed_seed() {
    let f = Fixture::new();
    let cfg = f.path("tiny.toml");
    let test = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/slu_test.tsv");
    ok(&["build-vocab", "--out", s(&f.path("v"))]);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let ckpt = f.path(&format!("{run}.ckpt"));
        let noisy = f.path(&format!("{run}.tsv"));
        let ft = f.path("ft");
        let log = [
            ok(&["pretrain", "--config", s(&cfg), "--seed", "5", "--vocab", s(&f.path("v")), "--out", s(&ckpt)]),
            ok(&["corrupt", "--seed", "5", "--vocab", s(&f.path("v")), "--input", s(&test), "--out", s(&noisy)]),
            ok(&["warp-preview", "--seed", "5", "--json", "show me flights from boston to denver please"]),
            ok(&["finetune", "--config", s(&cfg), "--vocab", s(&f.path("v")), "--checkpoint", s(&ckpt), "--out-dir", s(&ft)]),
        ];
        let files = [
            std::fs::read(&ckpt).unwrap(),
            std::fs::read(&noisy).unwrap(),
            std::fs::read(wlm::experiment::commands::sidecar_path(&noisy)).unwrap(),
            std::fs::read(ft.join("slu_seed0.ckpt")).unwrap(),
        ];
        outputs.push((log, files));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    for (k, (a, b)) in outputs[0].1.iter().zip(&outputs[1].1).enumerate() {
        assert!(a == b, "output file {k} differs between runs");
    }
    for ckpt in ["a.ckpt", "ft/slu_seed0.ckpt"] {
        let header = wlm::nnet::Checkpoint::load(f.path(ckpt)).unwrap().header;
        assert_eq!(header.meta["run_config"]["d_model"], 16, "{ckpt}");
    }
    let pretrain_log = &outputs[0].0[0];
    let first: Value = serde_json::from_str(pretrain_log.lines().next().unwrap()).unwrap();
    for key in ["epoch", "train_loss", "val_perplexity", "val_accuracy"] {
        assert!(first.get(key).is_some(), "{key}");
    }
}

#[test]
fn gold_predictions_score_perfectly() {
    let test = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/slu_test.tsv");
    let out = ok(&["evaluate", "--predictions", s(&test), "--test", s(&test)]);
    let v: Value = serde_json::from_str(out.trim()).unwrap();
    for key in ["intent_acc", "slot_f1", "joint_acc"] {
        assert_eq!(v[key], 1.0, "{key}");
    }
}

#[test]
fn bad_input_gives_one_line_and_nonzero_exit() {
    for args in [
        &["evaluate", "--test", "/nonexistent/file.tsv", "--predictions", "/nonexistent/p.tsv"][..],
        &["warp-preview", "--config", "/nonexistent.toml", "hello"][..],
        &["corrupt", "--input", "Cargo.toml", "--out", "/tmp/x.tsv", "--preset", "loud"][..],
    ] {
        let out = wlm(args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn mlm_preview_keeps_sentence_length(words in proptest::collection::vec("[a-z]{1,6}", 1..30), seed in any::<u64>()) {
        let cfg = RunConfig { seed: Some(seed), objective: Some(wlm::nnet::Objective::Mlm), ..RunConfig::default() };
        let mut out = Vec::new();
        cmd_warp_preview(&cfg, &words.join(" "), true, &mut out).unwrap();
        let v: Value = serde_json::from_slice(&out).unwrap();
        prop_assert_eq!(v["input_ids"].as_array().unwrap().len(), words.len());
        prop_assert_eq!(v["label_ids"].as_array().unwrap().len(), words.len());
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// Two-sided p-value by listing every relabelling of the pooled values.
fn enumerated_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let observed = (b.iter().sum::<f64>() / b.len() as f64 - a.iter().sum::<f64>() / a.len() as f64).abs();
    let (mut hits, mut total) = (0, 0);
    for mask in 0u32..1 << n {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let (mut sa, mut sb) = (0.0, 0.0);
        for (i, x) in pooled.iter().enumerate() {
            if mask >> i & 1 == 1 {
                sa += x
            } else {
                sb += x
            }
        }
        total += 1;
        if (sb / b.len() as f64 - sa / a.len() as f64).abs() >= observed - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

#[test]
fn report_numbers_recompute_from_run_lines() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::parse(TINY).unwrap();
    cfg.seeds = Some(vec![0, 1, 2]);
    cfg.out_dir = Some(dir.path().to_path_buf());
    let mut table = Vec::new();
    cmd_experiment(&cfg, &mut table, |_| {}).unwrap();
    assert_eq!(std::fs::read(dir.path().join("report.txt")).unwrap(), table);

    let lines: Vec<Value> = std::fs::read_to_string(dir.path().join("report.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let runs: Vec<&Value> = lines.iter().filter(|v| v.get("seed").is_some()).collect();
    assert_eq!(runs.len(), 2 * 3 * 3);
    let values = |obj: &str, setting: &str, metric: &str| -> Vec<f64> {
        runs.iter()
            .filter(|r| r["objective"] == obj && r["setting"] == setting)
            .map(|r| r[metric].as_f64().unwrap())
            .collect()
    };
    let summaries: Vec<&Value> = lines.iter().filter(|v| v.get("mean").is_some()).collect();
    assert_eq!(summaries.len(), 2 * 3 * 3);
    let table = String::from_utf8(table).unwrap();
    for c in summaries {
        let xs = values(c["objective"].as_str().unwrap(), c["setting"].as_str().unwrap(), c["metric"].as_str().unwrap());
        let (m, sd) = mean_sd(&xs);
        assert!((c["mean"].as_f64().unwrap() - m).abs() < 1e-12);
        assert!((c["std"].as_f64().unwrap() - sd).abs() < 1e-12);
        assert!(table.contains(&format!("{:.2}±{:.2}", 100.0 * m, 100.0 * sd)), "{c}");
    }
    let tests: Vec<&Value> = lines.iter().filter(|v| v.get("p_value").is_some()).collect();
    assert_eq!(tests.len(), 3 * 3);
    for t in tests {
        let (setting, metric) = (t["setting"].as_str().unwrap(), t["metric"].as_str().unwrap());
        let (a, b) = (values("mlm", setting, metric), values("wlm", setting, metric));
        assert!((t["p_value"].as_f64().unwrap() - enumerated_p(&a, &b)).abs() < 1e-12, "{t}");
        let gap = b.iter().sum::<f64>() / 3.0 - a.iter().sum::<f64>() / 3.0;
        assert!((t["wlm_minus_mlm"].as_f64().unwrap() - gap).abs() < 1e-12);
        assert_eq!(t["exact"], true);
    }
}
