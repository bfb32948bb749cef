//! Loss, optimiser, learning-rate schedule, degradation and the training
//! loop.

mod data;
mod loss;
mod optim;
mod schedule;
mod trainer;

pub use data::{
    degrade, degrade_frame, sample_batch, synth_clip, synthetic_eval_set, BatchSpec, ClipSource, SynthScene,
    DEGRADE_SIGMA,
};
pub use loss::{charbonnier_loss, sequence_loss, LossConfig};
pub use optim::{adam_step, AdamConfig, OptimizerState};
pub use schedule::{lr_at, LrSchedule};
pub use trainer::{TrainConfig, TrainRecord, Trainer};
