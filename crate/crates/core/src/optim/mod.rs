//! Adam, early stopping and the epoch-level training driver.

pub mod adam;
pub mod early_stop;
pub mod trainer;

pub use adam::{Adam, AdamConfig};
pub use early_stop::{EarlyStopper, StopDecision};
pub use trainer::{fit, mean_loss, EpochRecord, TrainConfig, Trainable, TrainingLog};
