use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub dropout: f32,
}

impl ModelConfig {
    /// Small CPU-trainable preset.
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_ff: 256,
            max_len: 64,
            dropout: 0.1,
        }
    }

    /// 512-wide, 12-layer, 16-head encoder.
    pub fn full(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            d_model: 512,
            n_layers: 12,
            n_heads: 16,
            d_ff: 2048,
            max_len: 512,
            dropout: 0.1,
        }
    }

    pub fn preset(name: &str, vocab_size: usize) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk(vocab_size)),
            "full" => Ok(Self::full(vocab_size)),
            other => Err(Error::config(format!("unknown model preset {other:?}"))),
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("d_model", self.d_model),
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("d_ff", self.d_ff),
            ("max_len", self.max_len),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::config(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout {} not in [0,1)", self.dropout)));
        }
        Ok(())
    }

    /// Closed-form parameter count of [`super::EncoderModel`].
    pub fn param_count(&self) -> usize {
        let d = self.d_model;
        let ff = self.d_ff;
        let per_layer = 2 * (2 * d) // two layer norms
            + 4 * (d * d + d) // q, k, v, o
            + (d * ff + ff) // ff1
            + (ff * d + d); // ff2
        self.vocab_size * d + self.max_len * d + self.n_layers * per_layer + 2 * d + self.vocab_size
    }
}
