//! Two-stage precipitation retrieval from geostationary imagery.
//!
//! The pipeline collocates multi-channel geostationary scenes with sparse
//! radar swaths on an equirectangular grid, cuts the result into patches,
//! and trains a pair of U-Nets: a rain/no-rain detector and a log-rate
//! regressor whose outputs are multiplied into the final estimate.
//! Verification uses categorical contingency scores (CSI, POD, FAR, Bias)
//! and per-satellite estimates are merged into a quasi-global mosaic.
//!
//! Modules map onto pipeline stages:
//!
//! * [`grid`]: grid geometry, collocation, patch tiling and the on-disk stores.
//! * [`dataset`]: splits, intensity classes, augmentation, log targets and LDS weights.
//! * [`nn`]: the small tensor/convolution engine the networks run on.
//! * [`model`]: U-Net definition, the two-stage combiner and checkpoints.
//! * [`training`]: losses, AdamW and the pretrain/fine-tune loop.
//! * [`eval`]: contingency tables, metric reports, CSI maps and case reports.
//! * [`mosaic`]: satellite coverage and overlap averaging.
//! * [`synth`]: procedural scenes and swaths with a known rain law.
//! * [`ablation`]: the design-choice ablation harness.
//! * [`kv`]: the flat `key = value` text used by manifests and config files.

// NaN-rejecting checks are written as `!(x >= t)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ablation;
pub mod dataset;
mod error;
pub mod eval;
pub mod exec;
pub mod grid;
pub mod kv;
pub mod model;
pub mod mosaic;
pub mod nn;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use exec::Execution;

/// Rain rate (mm/h) at and above which a cell counts as a precipitation event.
pub const RAIN_THRESHOLD: f64 = 0.2;
