//! The objective × setting × seed experiment grid.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::report::{ExperimentReport, NoiseSummary, RunRecord};
use crate::asrsim::make_noisy_slu_set;
use crate::error::{Error, Result};
use crate::nnet::{pretrain, Checkpoint, EncoderModel, EpochReport, Objective};
use crate::seed::{derive_seed, derived_rng};
use crate::slu::{evaluate, finetune, SluDataset, SluLabels};
use crate::textcore::Vocab;

const NOISE_STREAM: u64 = 0x4e4f_4953;
const INIT_STREAM: u64 = 0x494e_4954;

/// Which data the model is trained and tested on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    CleanClean,
    CleanNoisy,
    NoisyNoisy,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::CleanClean, Setting::CleanNoisy, Setting::NoisyNoisy];

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::CleanClean => "clean-clean",
            Setting::CleanNoisy => "clean-noisy",
            Setting::NoisyNoisy => "noisy-noisy",
        }
    }

    pub fn noisy_train(self) -> bool {
        self == Setting::NoisyNoisy
    }

    pub fn noisy_test(self) -> bool {
        self != Setting::CleanClean
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown setting {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentMatrix {
    pub objectives: Vec<Objective>,
    pub settings: Vec<Setting>,
    pub seeds: Vec<u64>,
}

impl ExperimentMatrix {
    pub fn new(mut objectives: Vec<Objective>, mut settings: Vec<Setting>, mut seeds: Vec<u64>) -> Result<Self> {
        objectives.sort_by_key(|o| o.as_str());
        objectives.dedup();
        settings.sort();
        settings.dedup();
        seeds.sort();
        seeds.dedup();
        if objectives.is_empty() || settings.is_empty() || seeds.is_empty() {
            return Err(Error::config("experiment matrix needs objectives, settings and seeds"));
        }
        Ok(ExperimentMatrix {
            objectives,
            settings,
            seeds,
        })
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Self::new(cfg.objectives(), cfg.settings(), cfg.seeds())
    }

    pub fn num_runs(&self) -> usize {
        self.objectives.len() * self.settings.len() * self.seeds.len()
    }
}

/// Pretrains a freshly initialized encoder under `objective`.
pub fn pretrain_encoder(
    cfg: &RunConfig,
    objective: Objective,
    vocab: &Vocab,
    train: &[Vec<u32>],
    val: &[Vec<u32>],
    on_epoch: impl FnMut(&EpochReport),
) -> Result<(Checkpoint, Vec<EpochReport>)> {
    let mcfg = cfg.model_config(vocab.len())?;
    let pcfg = cfg.pretrain_config(objective)?;
    let mut model = EncoderModel::new(mcfg, &mut derived_rng(cfg.seed(), INIT_STREAM))?;
    let reports = pretrain(&mut model, vocab, train, val, &pcfg, on_epoch)?;
    let mut ckpt = model.to_checkpoint(&vocab.hash(), Some(objective.as_str()));
    ckpt.header.meta = serde_json::json!({ "run_config": cfg.overlay(&RunConfig { objective: Some(objective), ..Default::default() }) });
    Ok((ckpt, reports))
}

/// Clean and noisy versions of the train, validation and test sets.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub clean: [SluDataset; 3],
    pub noisy: [SluDataset; 3],
    pub noise: NoiseSummary,
}

impl TaskData {
    /// Train and validation sets get the training noise, the test set the
    /// test noise, each from its own stream of the global seed.
    pub fn build(cfg: &RunConfig, vocab: &Vocab, clean: [SluDataset; 3]) -> Result<Self> {
        let base = derive_seed(cfg.seed(), NOISE_STREAM);
        let (train_noise, test_noise) = (cfg.train_noise()?, cfg.test_noise()?);
        let tr = make_noisy_slu_set(&clean[0], &train_noise, vocab, derive_seed(base, 0))?;
        let va = make_noisy_slu_set(&clean[1], &train_noise, vocab, derive_seed(base, 1))?;
        let te = make_noisy_slu_set(&clean[2], &test_noise, vocab, derive_seed(base, 2))?;
        let noise = NoiseSummary {
            train: tr.stats,
            val: va.stats,
            test: te.stats,
            fully_deleted: tr.n_fully_deleted + va.n_fully_deleted + te.n_fully_deleted,
        };
        Ok(TaskData {
            clean,
            noisy: [tr.dataset, va.dataset, te.dataset],
            noise,
        })
    }
}

/// Fine-tunes and evaluates every cell of the matrix. Clean-clean and
/// clean-noisy share one fine-tuned model per (objective, seed), since
/// they differ only in the test set.
pub fn run_matrix(
    cfg: &RunConfig,
    matrix: &ExperimentMatrix,
    vocab: &Vocab,
    pretrained: &BTreeMap<Objective, Checkpoint>,
    data: &TaskData,
    mut progress: impl FnMut(&RunRecord),
) -> Result<ExperimentReport> {
    let labels = SluLabels::from_datasets(&[&data.clean[0], &data.noisy[0]])?;
    let mut runs = Vec::with_capacity(matrix.num_runs());
    for &objective in &matrix.objectives {
        let ckpt = pretrained
            .get(&objective)
            .ok_or_else(|| Error::config(format!("no pretrained checkpoint for {objective}")))?;
        ckpt.check_vocab(vocab)?;
        if ckpt.header.objective.as_deref().is_some_and(|o| o != objective.as_str()) {
            return Err(Error::Checkpoint(format!(
                "checkpoint was pretrained with {:?}, expected {objective}",
                ckpt.header.objective
            )));
        }
        for &seed in &matrix.seeds {
            let fcfg = cfg.finetune_config(seed)?;
            let mut by_train: BTreeMap<bool, _> = BTreeMap::new();
            for &setting in &matrix.settings {
                let noisy_train = setting.noisy_train();
                if let Entry::Vacant(slot) = by_train.entry(noisy_train) {
                    let set = if noisy_train { &data.noisy } else { &data.clean };
                    slot.insert(finetune(ckpt, vocab, &labels, &set[0], &set[1], &fcfg, |_| {})?);
                }
                let out = &by_train[&noisy_train];
                let test = if setting.noisy_test() { &data.noisy[2] } else { &data.clean[2] };
                let (m, _) = evaluate(&out.model, test, vocab)?;
                let rec = RunRecord {
                    objective,
                    setting,
                    seed,
                    epoch: out.best_epoch,
                    intent_acc: m.intent_accuracy,
                    slot_f1: m.slot_f1,
                    joint_acc: m.joint_accuracy,
                };
                progress(&rec);
                runs.push(rec);
            }
        }
    }
    Ok(ExperimentReport::new(runs, data.noise))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setting_names() {
        for s in Setting::ALL {
            assert_eq!(s.as_str().parse::<Setting>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
        }
        assert!("noisy-clean".parse::<Setting>().is_err());
    }

    #[test]
    fn matrix_validation() {
        assert!(ExperimentMatrix::new(vec![], Setting::ALL.to_vec(), vec![0]).is_err());
        let m = ExperimentMatrix::new(vec![Objective::Wlm, Objective::Mlm], Setting::ALL.to_vec(), vec![4, 1, 1]).unwrap();
        assert_eq!(m.objectives, vec![Objective::Mlm, Objective::Wlm]);
        assert_eq!(m.seeds, vec![1, 4]);
        assert_eq!(m.num_runs(), 12);
    }
}
