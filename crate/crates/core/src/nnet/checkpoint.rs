//! Binary checkpoint format.
//!
//! ```text
//! "WLM1"                      magic
//! u32                         format version
//! u32 + bytes                 JSON header {kind, config, vocab_hash, objective, meta}
//! u32                         tensor count
//! per tensor:
//!   u32 + bytes               name (UTF-8)
//!   u32, u64 × ndim           shape
//!   f32 × numel               data
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::model::EncoderModel;
use super::params::Parameters;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::seed;
use crate::textcore::Vocab;

pub const MAGIC: &[u8; 4] = b"WLM1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub kind: String,
    pub config: ModelConfig,
    pub vocab_hash: String,
    #[serde(default)]
    pub objective: Option<String>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn from_params<P: Parameters<f32>>(header: CheckpointHeader, params: &P) -> Self {
        let tensors = params
            .named_params()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .collect();
        Checkpoint { header, tensors }
    }

    /// Copies tensors into `params`; names and shapes must match in order.
    pub fn load_into<P: Parameters<f32>>(&self, params: &mut P) -> Result<()> {
        let names: Vec<String> = params.named_params().into_iter().map(|(n, _)| n).collect();
        if names.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                names.len(),
                self.tensors.len()
            )));
        }
        for ((dst, name), (src_name, src)) in params.params_mut().into_iter().zip(&names).zip(&self.tensors) {
            if name != src_name || dst.shape() != src.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {src_name} {:?} does not match {name} {:?}",
                    src.shape(),
                    dst.shape()
                )));
            }
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }

    pub fn check_vocab(&self, vocab: &Vocab) -> Result<()> {
        let actual = vocab.hash();
        if actual != self.header.vocab_hash {
            return Err(Error::VocabMismatch {
                expected: self.header.vocab_hash.clone(),
                actual,
            });
        }
        Ok(())
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let header = serde_json::to_vec(&self.header)?;
        put_bytes(&mut out, &header);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            put_bytes(&mut out, name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &dim in t.shape() {
                out.extend_from_slice(&(dim as u64).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let header_len = r.u32()? as usize;
        let header: CheckpointHeader = serde_json::from_slice(r.take(header_len)?)?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
            let ndim = r.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u64()? as usize);
            }
            let numel: usize = shape.iter().product();
            let raw = r.take(numel * 4)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push((name, Tensor::from_vec(&shape, data)?));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Checkpoint { header, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::error::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| Error::file(path, e))?)
    }
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_le_bytes());
    out.extend_from_slice(b);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }
}

impl EncoderModel<f32> {
    pub fn to_checkpoint(&self, vocab_hash: &str, objective: Option<&str>) -> Checkpoint {
        Checkpoint::from_params(
            CheckpointHeader {
                kind: "encoder".into(),
                config: self.config,
                vocab_hash: vocab_hash.to_string(),
                objective: objective.map(str::to_string),
                meta: serde_json::Value::Null,
            },
            self,
        )
    }

    /// Rebuilds an encoder from the `kind = "encoder"` tensors of a checkpoint.
    /// Extra trailing tensors (for example task heads) are ignored.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let mut model = EncoderModel::new(ckpt.header.config, &mut seed::rng(0))?;
        let n = model.named_params().len();
        if ckpt.tensors.len() < n {
            return Err(Error::Checkpoint("too few tensors for encoder".into()));
        }
        let head = Checkpoint {
            header: ckpt.header.clone(),
            tensors: ckpt.tensors[..n].to_vec(),
        };
        head.load_into(&mut model)?;
        Ok(model)
    }
}
