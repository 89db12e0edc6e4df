//! Conditional flow matching: the straight-line conditional path, its target
//! field, the training loss and the optimizer loop.

mod adam;
mod schedule;
mod train;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use schedule::FlowSchedule;
pub use train::{
    cfm_loss, field_error, train, train_with, Cfm, CfmDraws, LinearDecay, LossParts, Objective,
    StepRecord, TrainConfig,
};
