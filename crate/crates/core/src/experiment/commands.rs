//! The operations behind each CLI subcommand. Machine-readable output is
//! written to `out` as JSON lines.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use super::matrix::{pretrain_encoder, run_matrix, ExperimentMatrix, TaskData};
use super::report::ExperimentReport;
use crate::asrsim::make_noisy_slu_set;
use crate::error::{Error, Result};
use crate::nnet::{Checkpoint, EpochReport};
use crate::slu::metrics::{slu_metrics, summarize, SluMetrics};
use crate::slu::{evaluate, finetune, SluDataset, SluLabels, SluModel};
use crate::synth::bundled;
use crate::textcore::{Corpus, Vocab};
use crate::warp::{render_preview, warp, PreviewRecord};

/// One metrics record: `setting` names the evaluated split or setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsLine {
    pub setting: String,
    pub seed: u64,
    pub epoch: usize,
    pub intent_acc: f64,
    pub slot_f1: f64,
    pub joint_acc: f64,
}

impl MetricsLine {
    pub fn new(setting: &str, seed: u64, epoch: usize, m: &SluMetrics) -> Self {
        MetricsLine {
            setting: setting.to_string(),
            seed,
            epoch,
            intent_acc: m.intent_accuracy,
            slot_f1: m.slot_f1,
            joint_acc: m.joint_accuracy,
        }
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string(value)?)?;
    Ok(())
}

fn read_or(path: Option<&Path>, fallback: &str) -> Result<String> {
    match path {
        Some(p) => crate::error::read_to_string(p),
        None => Ok(fallback.to_string()),
    }
}

/// Pretraining text: `corpus` and `val_corpus`, or the bundled corpus.
pub fn corpus_texts(cfg: &RunConfig) -> Result<(String, String)> {
    Ok((
        read_or(cfg.corpus.as_deref(), bundled::PRETRAIN_TRAIN)?,
        read_or(cfg.val_corpus.as_deref(), bundled::PRETRAIN_VAL)?,
    ))
}

/// `vocab` if set, otherwise built deterministically from the training corpus.
pub fn resolve_vocab(cfg: &RunConfig) -> Result<Vocab> {
    match &cfg.vocab {
        Some(p) => Vocab::load(p, true),
        None => Vocab::build(&corpus_texts(cfg)?.0, cfg.min_count(), cfg.max_vocab(), true),
    }
}

/// SLU train, validation and test sets from the config, or the bundled task.
pub fn resolve_task(cfg: &RunConfig) -> Result<[SluDataset; 3]> {
    let load = |p: &Option<PathBuf>, text: &str, name: &str| match p {
        Some(p) => SluDataset::load(p),
        None => SluDataset::parse(text, name),
    };
    Ok([
        load(&cfg.slu_train, bundled::SLU_TRAIN, "slu_train.tsv")?,
        load(&cfg.slu_val, bundled::SLU_VAL, "slu_val.tsv")?,
        load(&cfg.slu_test, bundled::SLU_TEST, "slu_test.tsv")?,
    ])
}

#[derive(Serialize)]
struct VocabLine<'a> {
    path: &'a Path,
    vocab_size: usize,
    hash: String,
}

pub fn cmd_build_vocab(cfg: &RunConfig, out_path: &Path, out: &mut dyn Write) -> Result<Vocab> {
    let (train, _) = corpus_texts(cfg)?;
    let vocab = Vocab::build(&train, cfg.min_count(), cfg.max_vocab(), true)?;
    vocab.save(out_path)?;
    emit(out, &VocabLine { path: out_path, vocab_size: vocab.len(), hash: vocab.hash() })?;
    Ok(vocab)
}

#[derive(Serialize)]
struct PretrainLine {
    epoch: usize,
    train_loss: Option<f64>,
    val_perplexity: f64,
    val_accuracy: f64,
}

impl From<&EpochReport> for PretrainLine {
    fn from(r: &EpochReport) -> Self {
        PretrainLine {
            epoch: r.epoch,
            train_loss: r.train_loss,
            val_perplexity: r.val_perplexity,
            val_accuracy: r.val_accuracy,
        }
    }
}

/// Pretrains under `cfg.objective()` and saves the checkpoint to `ckpt_path`.
pub fn cmd_pretrain(cfg: &RunConfig, ckpt_path: &Path, out: &mut dyn Write) -> Result<Checkpoint> {
    let vocab = resolve_vocab(cfg)?;
    let (train_text, val_text) = corpus_texts(cfg)?;
    let train = Corpus::from_text(&vocab, &train_text, "train");
    let val = Corpus::from_text(&vocab, &val_text, "val");
    let mut io_err = Ok(());
    let (ckpt, _) = pretrain_encoder(cfg, cfg.objective(), &vocab, &train.sentences, &val.sentences, |r| {
        if io_err.is_ok() {
            io_err = emit(out, &PretrainLine::from(r));
        }
    })?;
    io_err?;
    ckpt.save(ckpt_path)?;
    Ok(ckpt)
}

/// Warps one sentence. Unknown words map to UNK unless `vocab` is unset,
/// in which case the vocabulary is the sentence itself.
pub fn cmd_warp_preview(cfg: &RunConfig, sentence: &str, json: bool, out: &mut dyn Write) -> Result<()> {
    let vocab = match &cfg.vocab {
        Some(p) => Vocab::load(p, true)?,
        None => Vocab::build(sentence, 1, usize::MAX, true)?,
    };
    let ids = vocab.encode(sentence);
    let ex = warp(&ids, &cfg.warp_config(cfg.objective())?, &vocab, cfg.seed())?;
    if json {
        emit(out, &PreviewRecord::from(&ex))
    } else {
        write!(out, "{}", render_preview(&ex, &vocab)?)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct CorruptLine {
    n_utterances: usize,
    n_ref: usize,
    n_ins: usize,
    n_del: usize,
    n_sub: usize,
    wer: f64,
    fully_deleted: usize,
}

/// Corrupts an SLU set with the `preset` noise (plus `p_*` overrides),
/// writing the noisy set to `out_path` and the alignment sidecar to
/// `out_path` with an `.align.jsonl` suffix.
pub fn cmd_corrupt(cfg: &RunConfig, input: &Path, out_path: &Path, preset: &str, out: &mut dyn Write) -> Result<()> {
    let vocab = resolve_vocab(cfg)?;
    let clean = SluDataset::load(input)?;
    let noisy = make_noisy_slu_set(&clean, &cfg.noise(preset)?, &vocab, cfg.seed())?;
    noisy.dataset.save(out_path)?;
    crate::error::write(sidecar_path(out_path), noisy.sidecar_jsonl()?)?;
    let s = noisy.stats;
    emit(
        out,
        &CorruptLine {
            n_utterances: clean.len(),
            n_ref: s.n_ref,
            n_ins: s.n_ins,
            n_del: s.n_del,
            n_sub: s.n_sub,
            wer: s.wer,
            fully_deleted: noisy.n_fully_deleted,
        },
    )
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".align.jsonl");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct SummaryLine {
    summary: crate::slu::MetricSummary,
}

/// Fine-tunes `checkpoint` once per configured seed. Per-epoch validation
/// metrics and the test metrics of each kept model are emitted; models are
/// saved as `slu_seed<N>.ckpt` in `out_dir`.
pub fn cmd_finetune(cfg: &RunConfig, checkpoint: &Path, out: &mut dyn Write) -> Result<Vec<SluMetrics>> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let vocab = resolve_vocab(cfg)?;
    ckpt.check_vocab(&vocab)?;
    let [train, val, test] = resolve_task(cfg)?;
    let labels = SluLabels::from_datasets(&[&train])?;
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir)?;
    let mut tests = Vec::new();
    for seed in cfg.seeds() {
        let fcfg = cfg.finetune_config(seed)?;
        let mut io_err = Ok(());
        let res = finetune(&ckpt, &vocab, &labels, &train, &val, &fcfg, |m| {
            if io_err.is_ok() {
                io_err = emit(out, &MetricsLine::new("val", seed, m.epoch, &m.val));
            }
        })?;
        io_err?;
        let (m, _) = evaluate(&res.model, &test, &vocab)?;
        emit(out, &MetricsLine::new("test", seed, res.best_epoch, &m))?;
        let mut out_ckpt = res.model.to_checkpoint(&vocab.hash(), ckpt.header.objective.as_deref());
        out_ckpt.header.meta["run_config"] = serde_json::to_value(cfg.overlay(&RunConfig {
            seed: Some(seed),
            ..RunConfig::default()
        }))?;
        out_ckpt.save(dir.join(format!("slu_seed{seed}.ckpt")))?;
        tests.push(m);
    }
    emit(out, &SummaryLine { summary: summarize(&tests) })?;
    Ok(tests)
}

/// Scores `test` either with a fine-tuned checkpoint or against a file of
/// predictions in the dataset format.
pub fn cmd_evaluate(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    predictions: Option<&Path>,
    test: &Path,
    out: &mut dyn Write,
) -> Result<SluMetrics> {
    let gold = SluDataset::load(test)?;
    let m = match (checkpoint, predictions) {
        (Some(c), None) => {
            let ckpt = Checkpoint::load(c)?;
            let vocab = resolve_vocab(cfg)?;
            ckpt.check_vocab(&vocab)?;
            evaluate(&SluModel::from_checkpoint(&ckpt)?, &gold, &vocab)?.0
        }
        (None, Some(p)) => {
            let pred = SluDataset::load(p)?;
            if pred.len() != gold.len() {
                return Err(Error::LengthMismatch {
                    expected: gold.len(),
                    actual: pred.len(),
                });
            }
            slu_metrics(&gold.intents(), &pred.intents(), &gold.tag_sequences(), &pred.tag_sequences())?
        }
        _ => return Err(Error::config("give exactly one of a checkpoint or a predictions file")),
    };
    emit(out, &MetricsLine::new("test", cfg.seed(), 0, &m))?;
    Ok(m)
}

/// Runs the full matrix: pretrains (or loads) one encoder per objective,
/// builds noisy sets, fine-tunes and evaluates every cell. Writes
/// `report.txt` and `report.jsonl` to `out_dir` and the table to `out`.
pub fn cmd_experiment(
    cfg: &RunConfig,
    out: &mut dyn Write,
    mut progress: impl FnMut(&str),
) -> Result<ExperimentReport> {
    let matrix = ExperimentMatrix::from_config(cfg)?;
    let vocab = resolve_vocab(cfg)?;
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir)?;
    let (train_text, val_text) = corpus_texts(cfg)?;
    let train = Corpus::from_text(&vocab, &train_text, "train");
    let val = Corpus::from_text(&vocab, &val_text, "val");

    let mut pretrained = BTreeMap::new();
    for &objective in &matrix.objectives {
        let ckpt = match cfg.checkpoint_for(objective) {
            Some(p) => {
                let c = Checkpoint::load(p)?;
                c.check_vocab(&vocab)?;
                c
            }
            None => {
                let mut lines = String::new();
                let (c, reports) = pretrain_encoder(cfg, objective, &vocab, &train.sentences, &val.sentences, |r| {
                    progress(&format!(
                        "pretrain {objective} epoch {} val perplexity {:.2}",
                        r.epoch, r.val_perplexity
                    ))
                })?;
                for r in &reports {
                    lines.push_str(&serde_json::to_string(&PretrainLine::from(r))?);
                    lines.push('\n');
                }
                crate::error::write(dir.join(format!("pretrain_{objective}.jsonl")), lines)?;
                c.save(dir.join(format!("pretrain_{objective}.ckpt")))?;
                c
            }
        };
        pretrained.insert(objective, ckpt);
    }

    let data = TaskData::build(cfg, &vocab, resolve_task(cfg)?)?;
    let report = run_matrix(cfg, &matrix, &vocab, &pretrained, &data, |r| {
        progress(&format!(
            "{} {} seed {}: intent {:.4} slot {:.4} joint {:.4}",
            r.objective, r.setting, r.seed, r.intent_acc, r.slot_f1, r.joint_acc
        ))
    })?;
    let table = report.render_table();
    crate::error::write(dir.join("report.txt"), &table)?;
    crate::error::write(dir.join("report.jsonl"), report.to_jsonl()?)?;
    write!(out, "{table}")?;
    Ok(report)
}
