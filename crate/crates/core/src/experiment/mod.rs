//! Run configuration, the experiment matrix, reporting and the operations
//! behind the command-line interface.

pub mod commands;
pub mod config;
pub mod matrix;
pub mod report;
pub mod stats;

pub use commands::{
    cmd_build_vocab, cmd_corrupt, cmd_evaluate, cmd_experiment, cmd_finetune, cmd_pretrain, cmd_warp_preview,
};
pub use config::RunConfig;
pub use matrix::{ExperimentMatrix, Setting, TaskData};
pub use report::{ExperimentReport, Metric, RunRecord};
pub use stats::{permutation_test, PermutationTest};
