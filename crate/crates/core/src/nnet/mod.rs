//! Desk-scale neural core: tensors, transformer encoder, masked LM loss,
//! exact backward pass, Adam, checkpoints and the pretraining loop.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod params;
pub mod pretrain;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, CheckpointHeader};
pub use config::ModelConfig;
pub use loss::{lm_loss, perplexity, LmLoss};
pub use model::{EncoderModel, Linear, SeqCache, TokenBatch};
pub use params::Parameters;
pub use pretrain::{pretrain, EpochReport, Objective, PretrainConfig};
pub use tensor::{Scalar, Tensor};
