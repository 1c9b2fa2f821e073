//! Label distribution smoothing: a kernel-smoothed histogram of regression
//! targets whose inverse re-weights the regression loss.

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdsKernel {
    Gaussian,
    Triangular,
}

impl fmt::Display for LdsKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LdsKernel::Gaussian => "gaussian",
            LdsKernel::Triangular => "triangular",
        })
    }
}

impl FromStr for LdsKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(LdsKernel::Gaussian),
            "triangular" => Ok(LdsKernel::Triangular),
            other => Err(Error::Config(format!("unknown LDS kernel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdsConfig {
    /// Histogram bin width in log-rate units.
    pub bin_width: f64,
    pub kernel: LdsKernel,
    /// Kernel scale in bins: the gaussian sigma, or the triangular half-width.
    pub bandwidth: f64,
    pub clip_weight_max: f64,
}

impl Default for LdsConfig {
    fn default() -> Self {
        LdsConfig {
            bin_width: 0.1,
            kernel: LdsKernel::Gaussian,
            bandwidth: 2.0,
            clip_weight_max: 100.0,
        }
    }
}

impl LdsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width > 0.0 && self.bandwidth > 0.0 && self.clip_weight_max > 0.0)
            || !self.bin_width.is_finite()
            || !self.bandwidth.is_finite()
        {
            return Err(Error::Config(format!("invalid LDS configuration {self:?}")));
        }
        Ok(())
    }

    /// Discretized kernel over offsets `-radius..=radius`, summing to 1.
    pub fn kernel_weights(&self) -> Vec<f64> {
        let (radius, f): (i64, Box<dyn Fn(f64) -> f64>) = match self.kernel {
            LdsKernel::Gaussian => {
                let s = self.bandwidth;
                ((3.0 * s).ceil() as i64, Box::new(move |d: f64| (-d * d / (2.0 * s * s)).exp()))
            }
            LdsKernel::Triangular => {
                let b = self.bandwidth;
                (b.ceil() as i64, Box::new(move |d: f64| 1.0 - d.abs() / (b + 1.0)))
            }
        };
        let raw: Vec<f64> = (-radius..=radius).map(|d| f(d as f64)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

/// Fitted per-bin weights. Bins are anchored at zero: value `v` falls in bin
/// `floor(v / bin_width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdsTable {
    first_bin: i64,
    bin_width: f64,
    /// Smoothed label density per bin, as a fraction of the samples.
    density: Vec<f64>,
    clip: f64,
    scale: f64,
    uniform: bool,
}

impl LdsTable {
    pub fn fit(values: &[f64], cfg: &LdsConfig) -> Result<LdsTable> {
        cfg.validate()?;
        if values.is_empty() {
            return Err(Error::Invalid("LDS needs at least one sample".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("LDS samples must be finite".into()));
        }
        let bin = |v: f64| (v / cfg.bin_width).floor() as i64;
        let kernel = cfg.kernel_weights();
        let radius = (kernel.len() / 2) as i64;
        let (mut lo, mut hi) = (i64::MAX, i64::MIN);
        for &v in values {
            lo = lo.min(bin(v));
            hi = hi.max(bin(v));
        }
        let first_bin = lo - radius;
        let len = (hi - lo + 1 + 2 * radius) as usize;
        let mut hist = vec![0.0f64; len];
        for &v in values {
            hist[(bin(v) - first_bin) as usize] += 1.0;
        }
        let n = values.len() as f64;
        let mut density = vec![0.0f64; len];
        for (j, d) in density.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let src = j as i64 + radius - k as i64;
                if (0..len as i64).contains(&src) {
                    acc += w * hist[src as usize];
                }
            }
            *d = acc / n;
        }
        let mut table = LdsTable {
            first_bin,
            bin_width: cfg.bin_width,
            density,
            clip: cfg.clip_weight_max,
            scale: 1.0,
            uniform: lo == hi,
        };
        let raw_sum: f64 = values.iter().map(|&v| table.raw_weight(v)).sum();
        table.scale = n / raw_sum;
        Ok(table)
    }

    fn raw_weight(&self, v: f64) -> f64 {
        let b = (v / self.bin_width).floor() as i64 - self.first_bin;
        let d = if (0..self.density.len() as i64).contains(&b) {
            self.density[b as usize]
        } else {
            0.0
        };
        if d > 0.0 {
            (1.0 / d).min(self.clip)
        } else {
            self.clip
        }
    }

    /// Weight for a target value. The fitted samples average to exactly one.
    pub fn weight(&self, v: f64) -> f64 {
        if self.uniform {
            return 1.0;
        }
        self.raw_weight(v) * self.scale
    }
}

/// Per-sample inverse-density weights, clipped and rescaled to mean 1.
pub fn lds_weights(valid_log_rates: &[f64], cfg: &LdsConfig) -> Result<Vec<f64>> {
    let table = LdsTable::fit(valid_log_rates, cfg)?;
    Ok(valid_log_rates.iter().map(|&v| table.weight(v)).collect())
}
