use crate::grid::{ChannelDescriptor, GriddedPair};
use crate::nn::{Scalar, Tensor};
use crate::{Error, Execution, Result};

use super::unet::{unet_forward, ModelParams, UNetConfig};

/// How the detector's rain probability gates the regressor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CombineMode {
    /// `exp(log_rate)` where `p >= threshold`, zero elsewhere.
    Hard { threshold: f64 },
    /// `p · exp(log_rate)`.
    Soft,
}

impl Default for CombineMode {
    fn default() -> Self {
        CombineMode::Hard { threshold: 0.5 }
    }
}

/// Rain probability per cell from two-channel logits (no-rain, rain),
/// computed as a numerically stable softmax.
pub fn classifier_prob<T: Scalar>(logits: &Tensor<T>) -> Result<Vec<T>> {
    if logits.c != 2 {
        return Err(Error::Shape(format!("classifier output has {} channels, expected 2", logits.c)));
    }
    let (no, yes) = logits.data.split_at(logits.plane_len());
    Ok(no
        .iter()
        .zip(yes)
        .map(|(&a, &b)| {
            // softmax(b) = 1 / (1 + exp(a - b)), written to avoid overflow.
            let d = a - b;
            if d > T::zero() {
                let e = (-d).exp();
                e / (T::one() + e)
            } else {
                T::one() / (T::one() + d.exp())
            }
        })
        .collect())
}

/// Final rain-rate estimate from rain probability and natural-log rate.
pub fn combine(rain_prob: &[f32], log_rate: &[f32], mode: CombineMode) -> Result<Vec<f32>> {
    if rain_prob.len() != log_rate.len() {
        return Err(Error::Shape(format!(
            "probability map has {} cells, log-rate map {}",
            rain_prob.len(),
            log_rate.len()
        )));
    }
    Ok(rain_prob
        .iter()
        .zip(log_rate)
        .map(|(&p, &z)| {
            let rate = (z as f64).exp();
            let v = match mode {
                CombineMode::Hard { threshold } => {
                    if p as f64 >= threshold {
                        rate
                    } else {
                        0.0
                    }
                }
                CombineMode::Soft => p as f64 * rate,
            };
            v as f32
        })
        .collect())
}

/// Channel selection and standardization applied to raw radiances.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub channels: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl InputSpec {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.len() != self.mean.len() || self.channels.len() != self.std.len() {
            return Err(Error::Config("input channel list and statistics disagree".into()));
        }
        if self.mean.iter().chain(&self.std).any(|v| !v.is_finite()) || self.std.iter().any(|&s| s <= 0.0) {
            return Err(Error::Config("input statistics must be finite with positive spread".into()));
        }
        Ok(())
    }

    /// Position of each selected channel within `available`.
    pub fn resolve(&self, available: &[ChannelDescriptor]) -> Result<Vec<usize>> {
        self.channels
            .iter()
            .map(|name| {
                available
                    .iter()
                    .position(|c| &c.name == name)
                    .ok_or_else(|| Error::Config(format!("channel {name} is not present in the input")))
            })
            .collect()
    }

    /// Standardized network input. Undefined radiances map to the channel
    /// mean, i.e. zero after standardization.
    pub fn prepare(&self, pair: &GriddedPair, indices: &[usize]) -> Tensor<f32> {
        let mut data = Vec::with_capacity(indices.len() * pair.cells());
        for (k, &ci) in indices.iter().enumerate() {
            let (m, s) = (self.mean[k], self.std[k]);
            data.extend(pair.plane(ci).iter().map(|&v| {
                if v.is_finite() {
                    ((v as f64 - m) / s) as f32
                } else {
                    0.0
                }
            }));
        }
        Tensor::from_vec(indices.len(), pair.rows, pair.cols, data)
    }
}

/// One trained encoder–decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: UNetConfig,
    pub params: ModelParams<f32>,
}

impl Network {
    pub fn new(config: UNetConfig, params: ModelParams<f32>) -> Result<Self> {
        params.check(&config)?;
        Ok(Network { config, params })
    }

    /// Runs the network, edge-padding the input up to a multiple of
    /// `2^depth` and cropping the output back.
    pub fn forward_padded(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        let m = 1usize << self.config.depth;
        let (h, w) = (x.h.div_ceil(m) * m, x.w.div_ceil(m) * m);
        if (h, w) == (x.h, x.w) {
            return unet_forward(&self.params, &self.config, x);
        }
        let mut padded = Tensor::zeros(x.c, h, w);
        for c in 0..x.c {
            let src = x.plane(c);
            let dst = &mut padded.data[c * h * w..(c + 1) * h * w];
            for r in 0..h {
                let sr = r.min(x.h - 1);
                for q in 0..w {
                    dst[r * w + q] = src[sr * x.w + q.min(x.w - 1)];
                }
            }
        }
        let y = unet_forward(&self.params, &self.config, &padded)?;
        let mut out = Tensor::zeros(y.c, x.h, x.w);
        for c in 0..y.c {
            for r in 0..x.h {
                let s = c * h * w + r * w;
                let d = c * x.h * x.w + r * x.w;
                out.data[d..d + x.w].copy_from_slice(&y.data[s..s + x.w]);
            }
        }
        Ok(out)
    }
}

/// Per-cell outputs of the two-stage model.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageOutput {
    pub rows: usize,
    pub cols: usize,
    pub rain_prob: Vec<f32>,
    pub log_rate: Vec<f32>,
    pub estimate: Vec<f32>,
}

/// Rain detector plus log-rate regressor sharing one input layout.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageModel {
    pub classifier: Network,
    pub regressor: Network,
    pub input: InputSpec,
    pub combine: CombineMode,
}

impl TwoStageModel {
    pub fn new(classifier: Network, regressor: Network, input: InputSpec, combine: CombineMode) -> Result<Self> {
        input.validate()?;
        let n = input.channels.len();
        if classifier.config.in_channels != n || regressor.config.in_channels != n {
            return Err(Error::Config(format!("networks do not take the {n} configured input channels")));
        }
        if classifier.config.out_channels != 2 || regressor.config.out_channels != 1 {
            return Err(Error::Config("classifier needs 2 outputs and regressor 1".into()));
        }
        Ok(TwoStageModel {
            classifier,
            regressor,
            input,
            combine,
        })
    }

    pub fn predict(&self, pair: &GriddedPair, channels: &[ChannelDescriptor]) -> Result<TwoStageOutput> {
        let idx = self.input.resolve(channels)?;
        self.predict_tensor(&self.input.prepare(pair, &idx))
    }

    /// Prediction over `tile × tile` blocks, for windows too large to run
    /// in one pass. Blocks are predicted independently.
    pub fn predict_tiled(
        &self,
        pair: &GriddedPair,
        channels: &[ChannelDescriptor],
        tile: usize,
        exec: Execution,
    ) -> Result<TwoStageOutput> {
        if tile == 0 {
            return Err(Error::Config("tile size must be positive".into()));
        }
        if pair.rows <= tile && pair.cols <= tile {
            return self.predict(pair, channels);
        }
        let mut origins = Vec::new();
        for r in (0..pair.rows).step_by(tile) {
            for c in (0..pair.cols).step_by(tile) {
                origins.push((r, c, tile.min(pair.rows - r), tile.min(pair.cols - c)));
            }
        }
        let parts = exec.map(&origins, |&(r, c, h, w)| self.predict(&pair.crop(r, c, h, w)?, channels));
        let n = pair.cells();
        let mut out = TwoStageOutput {
            rows: pair.rows,
            cols: pair.cols,
            rain_prob: vec![0.0; n],
            log_rate: vec![0.0; n],
            estimate: vec![0.0; n],
        };
        for (&(r0, c0, h, w), part) in origins.iter().zip(parts) {
            let part = part?;
            for r in 0..h {
                let (d, s) = ((r0 + r) * pair.cols + c0, r * w);
                out.rain_prob[d..d + w].copy_from_slice(&part.rain_prob[s..s + w]);
                out.log_rate[d..d + w].copy_from_slice(&part.log_rate[s..s + w]);
                out.estimate[d..d + w].copy_from_slice(&part.estimate[s..s + w]);
            }
        }
        Ok(out)
    }

    /// Prediction from an already standardized input.
    pub fn predict_tensor(&self, x: &Tensor<f32>) -> Result<TwoStageOutput> {
        let rain_prob = classifier_prob(&self.classifier.forward_padded(x)?)?;
        let log_rate = self.regressor.forward_padded(x)?.data;
        let estimate = combine(&rain_prob, &log_rate, self.combine)?;
        Ok(TwoStageOutput {
            rows: x.h,
            cols: x.w,
            rain_prob,
            log_rate,
            estimate,
        })
    }
}
