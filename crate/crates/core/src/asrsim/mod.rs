//! ASR noise simulation, reference/hypothesis alignment and label transfer.

pub mod align;
pub mod noise;
pub mod transfer;

pub use align::{align, distance, wer, AlignmentOp, AlignmentStats};
pub use noise::{corrupt, NoiseConfig};
pub use transfer::{make_noisy_slu_set, transfer_labels, NoisySet, UtteranceRecord};
