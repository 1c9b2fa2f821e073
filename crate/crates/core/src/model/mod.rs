//! The two encoder–decoder networks and their multiplicative combination.

mod checkpoint;
mod two_stage;
mod unet;

pub use checkpoint::{Checkpoint, StageTag};
pub use two_stage::{classifier_prob, combine, CombineMode, InputSpec, Network, TwoStageModel, TwoStageOutput};
pub use unet::{unet_backward, unet_forward, unet_forward_cached, ForwardCache, ModelParams, ParamEntry, UNetConfig};
