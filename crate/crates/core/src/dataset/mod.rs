//! Training-ready examples: period splits, intensity classes, geometric
//! augmentation, the log target transform and LDS sample weights.

mod augment;
mod intensity;
mod lds;
mod split;

pub use augment::{augment, AugmentOp};
pub use intensity::{class_histogram, classify_intensity, ClassHistogram, IntensityClass, IntensityThresholds};
pub use lds::{lds_weights, LdsConfig, LdsKernel, LdsTable};
pub use split::split_by_period;

use crate::{Error, Result, RAIN_THRESHOLD};

/// Natural log of a rain rate; only defined for precipitating cells.
pub fn log_transform(rate: f64) -> Result<f64> {
    if !(rate >= RAIN_THRESHOLD) || !rate.is_finite() {
        return Err(Error::Invalid(format!(
            "rate {rate} mm/h is below the {RAIN_THRESHOLD} mm/h rain threshold"
        )));
    }
    Ok(rate.ln())
}

pub fn inv_log_transform(log_rate: f64) -> f64 {
    log_rate.exp()
}
