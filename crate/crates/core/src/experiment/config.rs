//! Flat TOML run configuration. Every key is optional; unset keys take the
//! defaults below, and command-line flags override file values.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `objective` | `"wlm"` | `"mlm"` or `"wlm"` |
//! | `seed` | `0` | global seed |
//! | `model` | `"desk"` | `"desk"` or `"full"` preset |
//! | `d_model`, `n_layers`, `n_heads`, `d_ff`, `max_len`, `dropout` | preset | model overrides |
//! | `p_select`, `mask`, `keep`, `rand`, `insert`, `drop` | objective preset | warp overrides |
//! | `epochs`, `batch_size`, `lr`, `max_steps` | `10`, `16`, `1e-3`, none | pretraining |
//! | `ft_epochs`, `ft_batch_size`, `ft_lr`, `ft_patience`, `freeze_encoder` | `30`, `16`, `3e-3`, none, `false` | fine-tuning |
//! | `corpus`, `val_corpus` | bundled | pretraining text, one sentence per line |
//! | `vocab`, `min_count`, `max_vocab` | built from `corpus`, `1`, `50000` | vocabulary |
//! | `slu_train`, `slu_val`, `slu_test` | bundled | SLU dataset files |
//! | `train_noise`, `test_noise` | `"train_val"`, `"test"` | noise presets for noisy sets |
//! | `p_sub`, `p_del`, `p_ins` | preset | noise overrides |
//! | `objectives`, `settings`, `seeds` | both, all three, `[0, 1, 2, 3, 4]` | experiment matrix |
//! | `mlm_checkpoint`, `wlm_checkpoint` | pretrain | reuse pretrained encoders in an experiment |
//! | `out_dir` | `"runs"` | output directory |
//!
//! Relative paths in a file are resolved against the file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::matrix::Setting;
use crate::asrsim::NoiseConfig;
use crate::error::{Error, Result};
use crate::nnet::{AdamConfig, ModelConfig, Objective, PretrainConfig};
use crate::slu::FinetuneConfig;
use crate::warp::WarpConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub objective: Option<Objective>,
    pub seed: Option<u64>,

    pub model: Option<String>,
    pub d_model: Option<usize>,
    pub n_layers: Option<usize>,
    pub n_heads: Option<usize>,
    pub d_ff: Option<usize>,
    pub max_len: Option<usize>,
    pub dropout: Option<f32>,

    pub p_select: Option<f64>,
    pub mask: Option<f64>,
    pub keep: Option<f64>,
    pub rand: Option<f64>,
    pub insert: Option<f64>,
    pub drop: Option<f64>,

    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub max_steps: Option<usize>,

    pub ft_epochs: Option<usize>,
    pub ft_batch_size: Option<usize>,
    pub ft_lr: Option<f64>,
    pub ft_patience: Option<usize>,
    pub freeze_encoder: Option<bool>,

    pub corpus: Option<PathBuf>,
    pub val_corpus: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub min_count: Option<usize>,
    pub max_vocab: Option<usize>,
    pub slu_train: Option<PathBuf>,
    pub slu_val: Option<PathBuf>,
    pub slu_test: Option<PathBuf>,

    pub train_noise: Option<String>,
    pub test_noise: Option<String>,
    pub p_sub: Option<f64>,
    pub p_del: Option<f64>,
    pub p_ins: Option<f64>,

    pub objectives: Option<Vec<Objective>>,
    pub settings: Option<Vec<Setting>>,
    pub seeds: Option<Vec<u64>>,
    pub mlm_checkpoint: Option<PathBuf>,
    pub wlm_checkpoint: Option<PathBuf>,

    pub out_dir: Option<PathBuf>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.message().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::parse(&crate::error::read_to_string(path)?)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.corpus,
            &mut self.val_corpus,
            &mut self.vocab,
            &mut self.slu_train,
            &mut self.slu_val,
            &mut self.slu_test,
            &mut self.mlm_checkpoint,
            &mut self.wlm_checkpoint,
            &mut self.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    /// `self` with every key set in `over` replaced.
    pub fn overlay(&self, over: &RunConfig) -> RunConfig {
        let mut out = self.clone();
        overlay!(out, over;
            objective, seed, model, d_model, n_layers, n_heads, d_ff, max_len, dropout,
            p_select, mask, keep, rand, insert, drop,
            epochs, batch_size, lr, max_steps,
            ft_epochs, ft_batch_size, ft_lr, ft_patience, freeze_encoder,
            corpus, val_corpus, vocab, min_count, max_vocab, slu_train, slu_val, slu_test,
            train_noise, test_noise, p_sub, p_del, p_ins,
            objectives, settings, seeds, mlm_checkpoint, wlm_checkpoint, out_dir,
        );
        out
    }

    pub fn objective(&self) -> Objective {
        self.objective.unwrap_or(Objective::Wlm)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn model_config(&self, vocab_size: usize) -> Result<ModelConfig> {
        let mut m = ModelConfig::preset(self.model.as_deref().unwrap_or("desk"), vocab_size)?;
        if let Some(v) = self.d_model {
            m.d_model = v;
        }
        if let Some(v) = self.n_layers {
            m.n_layers = v;
        }
        if let Some(v) = self.n_heads {
            m.n_heads = v;
        }
        if let Some(v) = self.d_ff {
            m.d_ff = v;
        }
        if let Some(v) = self.max_len {
            m.max_len = v;
        }
        if let Some(v) = self.dropout {
            m.dropout = v;
        }
        m.validate()?;
        Ok(m)
    }

    pub fn warp_config(&self, objective: Objective) -> Result<WarpConfig> {
        let mut w = objective.warp_config();
        if let Some(v) = self.p_select {
            w.p_select = v;
        }
        let p = &mut w.proportions;
        for (slot, v) in [
            (&mut p.mask, self.mask),
            (&mut p.keep, self.keep),
            (&mut p.rand, self.rand),
            (&mut p.insert, self.insert),
            (&mut p.drop, self.drop),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        w.validate()?;
        Ok(w)
    }

    fn adam(lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }

    pub fn pretrain_config(&self, objective: Objective) -> Result<PretrainConfig> {
        let mut c = PretrainConfig::new(objective, self.seed());
        c.warp = self.warp_config(objective)?;
        c.adam = Self::adam(self.lr.unwrap_or(1e-3));
        c.epochs = self.epochs.unwrap_or(10);
        c.batch_size = self.batch_size.unwrap_or(16);
        c.max_steps = self.max_steps;
        if c.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        Ok(c)
    }

    pub fn finetune_config(&self, seed: u64) -> Result<FinetuneConfig> {
        let mut c = FinetuneConfig::new(seed);
        c.adam = Self::adam(self.ft_lr.unwrap_or(3e-3));
        c.epochs = self.ft_epochs.unwrap_or(30);
        c.batch_size = self.ft_batch_size.unwrap_or(16);
        c.patience = self.ft_patience;
        c.freeze_encoder = self.freeze_encoder.unwrap_or(false);
        if c.batch_size == 0 || c.epochs == 0 {
            return Err(Error::config("ft_epochs and ft_batch_size must be positive"));
        }
        Ok(c)
    }

    /// A noise preset with the `p_*` overrides applied.
    pub fn noise(&self, preset: &str) -> Result<NoiseConfig> {
        let mut n = NoiseConfig::preset(preset)?;
        if let Some(v) = self.p_sub {
            n.p_sub = v;
        }
        if let Some(v) = self.p_del {
            n.p_del = v;
        }
        if let Some(v) = self.p_ins {
            n.p_ins = v;
        }
        n.validate()?;
        Ok(n)
    }

    /// Noise applied to training and validation sets.
    pub fn train_noise(&self) -> Result<NoiseConfig> {
        self.noise(self.train_noise.as_deref().unwrap_or("train_val"))
    }

    /// Noise applied to test sets.
    pub fn test_noise(&self) -> Result<NoiseConfig> {
        self.noise(self.test_noise.as_deref().unwrap_or("test"))
    }

    pub fn min_count(&self) -> usize {
        self.min_count.unwrap_or(1)
    }

    pub fn max_vocab(&self) -> usize {
        self.max_vocab.unwrap_or(50_000)
    }

    pub fn objectives(&self) -> Vec<Objective> {
        self.objectives.clone().unwrap_or_else(|| Objective::ALL.to_vec())
    }

    pub fn settings(&self) -> Vec<Setting> {
        self.settings.clone().unwrap_or_else(|| Setting::ALL.to_vec())
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| (0..5).collect())
    }

    pub fn checkpoint_for(&self, objective: Objective) -> Option<&Path> {
        match objective {
            Objective::Mlm => self.mlm_checkpoint.as_deref(),
            Objective::Wlm => self.wlm_checkpoint.as_deref(),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs"))
    }
}
