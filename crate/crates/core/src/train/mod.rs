//! Training loop, learning-rate schedule, configuration and checkpoints.

mod checkpoint;
mod config;
mod fit;
mod scheduler;

pub use checkpoint::{write_atomic, Checkpoint, TrainingState, FORMAT_VERSION, MAGIC};
pub use config::{SchedulerConfig, TrainConfig, CONFIG_KEYS};
pub use fit::{epoch_log_csv, evaluate, fit, train_step, EpochRecord, Trainer, EPOCH_LOG_HEADER};
pub use scheduler::PlateauScheduler;
