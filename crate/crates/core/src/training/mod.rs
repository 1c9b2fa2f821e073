//! Losses, optimizer and the pretrain / fine-tune / scratch training loop.

mod config;
mod examples;
mod losses;
mod optim;
mod train;

pub use config::{ClassWeights, Stage, TrainConfig};
pub use examples::{build_examples, example_gradients, validation_loss, Example, ExampleGrads};
pub use losses::{lds_weighted_regression_loss, masked_l2_loss, weighted_ce_loss, Loss};
pub use optim::{optimizer_step, AdamConfig, AdamState};
pub use train::{append_loss_log, inverse_frequency_weights, train, Control, LossReport, TrainOutcome};
