//! Joint intent detection and slot filling on top of the encoder.

pub mod data;
pub mod finetune;
pub mod iob;
pub mod metrics;
pub mod model;

pub use data::{LabelSet, SluDataset, SluLabels, TaggedUtterance};
pub use finetune::{evaluate, finetune, EpochMetrics, FinetuneConfig, FinetuneOutcome};
pub use iob::Span;
pub use metrics::{conll_f1, intent_accuracy, joint_accuracy, slu_metrics, tag_sequence_accuracy, MetricSummary, Prf, SluMetrics};
pub use model::{slu_loss, EncodedUtterance, Prediction, SluModel, SluOutput};
