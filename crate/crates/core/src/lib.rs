pub mod asrsim;
pub mod error;
pub mod experiment;
pub mod nnet;
pub mod seed;
pub mod slu;
pub mod synth;
pub mod textcore;
pub mod warp;

pub use error::{Error, Result};
