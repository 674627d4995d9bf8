//! A small fully-connected regressor with exact reverse-mode gradients, Adam,
//! a mini-batch trainer, and a JSON checkpoint format.

pub mod adam;
pub mod checkpoint;
pub mod mlp;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use mlp::{Activation, MlpParams, ParamGrads, Tape};
pub use train::{train, EpochLog, TrainConfig, TrainOutcome};
