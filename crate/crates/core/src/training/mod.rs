//! Alternating adversarial training with staged loss weights.

mod config;
mod optim;
mod schedule;
mod step;
mod trainer;

pub use config::TrainConfig;
pub use optim::{clip_global_norm, Adam};
pub use schedule::{lr_schedule, schedule_registry, stage_weights, Stage, StageSchedule};
pub use step::{
    discriminator_objective, discriminator_step, generator_objective, generator_pass, rank_scores, train_step,
    Models, Optimizers, StepSettings, MIN_RANK_SIDE,
};
pub use trainer::{
    checkpoint_generator_params, latest_checkpoint, train, LearningRates, LogRecord, TrainSummary, Trainer,
    CHECKPOINT_DIR, CONFIG_FILE, LOG_FILE, VALIDATION_DIR,
};
