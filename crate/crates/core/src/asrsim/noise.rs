//! ASR-style noise channel: per-token deletion or substitution, per-gap
//! insertion.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::textcore::{is_special, Vocab, UNK};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub p_sub: f64,
    pub p_del: f64,
    pub p_ins: f64,
}

impl NoiseConfig {
    pub const fn none() -> Self {
        NoiseConfig { p_sub: 0.0, p_del: 0.0, p_ins: 0.0 }
    }

    /// Error rates measured on the training and validation ASR output.
    pub const fn train_val() -> Self {
        NoiseConfig { p_sub: 0.129, p_del: 0.024, p_ins: 0.033 }
    }

    /// Error rates measured on the test ASR output.
    pub const fn test() -> Self {
        NoiseConfig { p_sub: 0.115, p_del: 0.015, p_ins: 0.029 }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "none" => Ok(Self::none()),
            "train_val" | "train-val" => Ok(Self::train_val()),
            "test" => Ok(Self::test()),
            other => Err(Error::config(format!("unknown noise preset {other:?}"))),
        }
    }

    /// Expected WER when no alignment re-explains edits.
    pub fn nominal_wer(&self) -> f64 {
        self.p_sub + self.p_del + self.p_ins
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_sub", self.p_sub), ("p_del", self.p_del), ("p_ins", self.p_ins)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::config(format!("{name} = {p} outside [0, 1)")));
            }
        }
        // Substitution is drawn only for surviving tokens.
        if self.p_sub + self.p_del > 1.0 {
            return Err(Error::config("p_sub + p_del exceeds 1"));
        }
        Ok(())
    }
}

/// Core channel over any token type. For each reference token: with
/// probability `p_ins` insert `insert(rng)` before it; then delete it with
/// probability `p_del`, else substitute `substitute(rng, tok)` with
/// probability `p_sub / (1 − p_del)`, else keep it. This makes the marginal
/// substitution rate per reference token exactly `p_sub`.
pub fn corrupt_with<T: Clone>(
    tokens: &[T],
    cfg: &NoiseConfig,
    rng: &mut Rng,
    mut insert: impl FnMut(&mut Rng) -> T,
    mut substitute: impl FnMut(&mut Rng, &T) -> T,
) -> Vec<T> {
    let p_sub_given_kept = if cfg.p_del < 1.0 { cfg.p_sub / (1.0 - cfg.p_del) } else { 0.0 };
    let mut out = Vec::with_capacity(tokens.len() + tokens.len() / 8 + 1);
    for tok in tokens {
        if rng.random::<f64>() < cfg.p_ins {
            out.push(insert(rng));
        }
        if rng.random::<f64>() < cfg.p_del {
            continue;
        }
        if rng.random::<f64>() < p_sub_given_kept {
            out.push(substitute(rng, tok));
        } else {
            out.push(tok.clone());
        }
    }
    out
}

/// Uniform draw over word ids other than `avoid`.
pub(crate) fn random_word_except(vocab: &Vocab, avoid: Option<u32>, rng: &mut Rng) -> u32 {
    let words = vocab.word_ids();
    match avoid {
        Some(a) if words.contains(&a) && words.len() > 1 => {
            let k = rng.random_range(words.start..words.end - 1);
            if k >= a {
                k + 1
            } else {
                k
            }
        }
        _ => rng.random_range(words),
    }
}

/// Corrupts an id sequence. Inserted and substituted tokens are uniform
/// over word ids; a substitute always differs from the original.
pub fn corrupt(tokens: &[u32], cfg: &NoiseConfig, vocab: &Vocab, rng: &mut Rng) -> Result<Vec<u32>> {
    cfg.validate()?;
    if let Some(&s) = tokens.iter().find(|&&t| is_special(t) && t != UNK) {
        return Err(Error::SpecialInInput(s));
    }
    if let Some(&s) = tokens.iter().find(|&&t| t as usize >= vocab.len()) {
        return Err(Error::UnknownId(s));
    }
    if vocab.num_words() < 2 && (cfg.p_sub > 0.0 || cfg.p_ins > 0.0) {
        return Err(Error::config("noise needs at least two vocabulary words"));
    }
    Ok(corrupt_with(
        tokens,
        cfg,
        rng,
        |r| random_word_except(vocab, None, r),
        |r, &t| random_word_except(vocab, Some(t), r),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn vocab() -> Vocab {
        Vocab::from_words((0..50).map(|i| format!("w{i}")), true).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let v = vocab();
        let x: Vec<u32> = (5..40).collect();
        assert_eq!(corrupt(&x, &NoiseConfig::none(), &v, &mut seed::rng(1)).unwrap(), x);
    }

    #[test]
    fn full_deletion_empties() {
        let v = vocab();
        let cfg = NoiseConfig { p_sub: 0.0, p_del: 0.999_999_999, p_ins: 0.0 };
        let x: Vec<u32> = (5..40).collect();
        assert!(corrupt(&x, &cfg, &v, &mut seed::rng(1)).unwrap().is_empty());
    }

    #[test]
    fn substitutes_differ_and_are_words() {
        let v = vocab();
        let cfg = NoiseConfig { p_sub: 0.99, p_del: 0.0, p_ins: 0.0 };
        let x: Vec<u32> = (5..55).cycle().take(2000).collect();
        let y = corrupt(&x, &cfg, &v, &mut seed::rng(2)).unwrap();
        assert_eq!(y.len(), x.len());
        let same = x.iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(same < 60, "{same}");
        assert!(y.iter().all(|&t| v.word_ids().contains(&t)));
    }

    #[test]
    fn deterministic_under_seed() {
        let v = vocab();
        let x: Vec<u32> = (5..55).collect();
        let cfg = NoiseConfig::train_val();
        let a = corrupt(&x, &cfg, &v, &mut seed::rng(7)).unwrap();
        let b = corrupt(&x, &cfg, &v, &mut seed::rng(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        let v = vocab();
        assert!(corrupt(&[5, crate::textcore::MASK], &NoiseConfig::none(), &v, &mut seed::rng(0)).is_err());
        assert!(corrupt(&[5, UNK], &NoiseConfig::none(), &v, &mut seed::rng(0)).is_ok());
        let bad = NoiseConfig { p_sub: 1.0, p_del: 0.0, p_ins: 0.0 };
        assert!(bad.validate().is_err());
        assert!(NoiseConfig::preset("test").unwrap() == NoiseConfig::test());
        assert!(NoiseConfig::preset("loud").is_err());
    }

    #[test]
    fn nominal_wer_of_presets() {
        assert!((NoiseConfig::train_val().nominal_wer() - 0.186).abs() < 1e-12);
        assert!((NoiseConfig::test().nominal_wer() - 0.159).abs() < 1e-12);
    }
}
