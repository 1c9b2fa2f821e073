use crate::dataset::{log_transform, AugmentOp, LdsTable};
use crate::grid::{ChannelDescriptor, GriddedPair};
use crate::model::{unet_backward, unet_forward, unet_forward_cached, ModelParams, TwoStageModel, UNetConfig};
use crate::nn::{Scalar, Tensor};
use crate::{Execution, Result, RAIN_THRESHOLD};

use super::losses::{lds_weighted_regression_loss, weighted_ce_loss};

/// A training-ready example: standardized input plus per-cell targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub x: Tensor<T>,
    /// Cells with ground truth.
    pub valid: Vec<bool>,
    /// Valid cells at or above the rain threshold.
    pub rain: Vec<bool>,
    /// Natural-log rate on rain cells, zero elsewhere.
    pub z: Vec<T>,
    /// Regression weight on rain cells, one elsewhere.
    pub weight: Vec<T>,
}

impl<T: Scalar> Example<T> {
    /// Applies a geometric op to the input and every target plane.
    pub fn augmented(&self, op: AugmentOp) -> Example<T> {
        if op == AugmentOp::Identity {
            return self.clone();
        }
        let (h, w) = (self.x.h, self.x.w);
        let mut data = Vec::with_capacity(self.x.data.len());
        for c in 0..self.x.c {
            data.extend(op.apply_plane(self.x.plane(c), h, w));
        }
        let (oh, ow) = if matches!(op, AugmentOp::Rot90 | AugmentOp::Rot270) { (w, h) } else { (h, w) };
        Example {
            x: Tensor::from_vec(self.x.c, oh, ow, data),
            valid: op.apply_plane(&self.valid, h, w),
            rain: op.apply_plane(&self.rain, h, w),
            z: op.apply_plane(&self.z, h, w),
            weight: op.apply_plane(&self.weight, h, w),
        }
    }
}

/// Standardizes the selected channels and derives rain labels, log-rate
/// targets and (optionally) LDS weights for each pair.
pub fn build_examples(
    pairs: &[GriddedPair],
    channels: &[ChannelDescriptor],
    model: &TwoStageModel,
    lds: Option<&LdsTable>,
    exec: Execution,
) -> Result<Vec<Example<f32>>> {
    let idx = model.input.resolve(channels)?;
    exec.map(pairs, |p| {
        let x = model.input.prepare(p, &idx);
        let n = p.cells();
        let mut rain = vec![false; n];
        let mut z = vec![0.0f32; n];
        let mut weight = vec![1.0f32; n];
        for i in 0..n {
            if p.m[i] && p.y[i] as f64 >= RAIN_THRESHOLD {
                rain[i] = true;
                let zi = log_transform(p.y[i] as f64)?;
                z[i] = zi as f32;
                if let Some(t) = lds {
                    weight[i] = t.weight(zi) as f32;
                }
            }
        }
        Ok(Example {
            x,
            valid: p.m.clone(),
            rain,
            z,
            weight,
        })
    })
    .into_iter()
    .collect()
}

/// Summed losses of one example and their parameter gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleGrads<T> {
    pub classifier: Vec<T>,
    pub regressor: Vec<T>,
    pub ce: f64,
    pub reg: f64,
    pub valid: usize,
    pub rain: usize,
}

/// Forward and backward passes of both networks on one example. The
/// classifier sees every valid cell; the regressor only rain cells, so it is
/// skipped entirely when there are none.
pub fn example_gradients<T: Scalar>(
    classifier: (&ModelParams<T>, &UNetConfig),
    regressor: (&ModelParams<T>, &UNetConfig),
    ex: &Example<T>,
    class_weights: [f64; 2],
) -> Result<ExampleGrads<T>> {
    let (cp, cc) = classifier;
    let (rp, rc) = regressor;
    let mut gc = vec![T::zero(); cp.len()];
    let mut gr = vec![T::zero(); rp.len()];
    let (h, w) = (ex.x.h, ex.x.w);

    let (logits, cache) = unet_forward_cached(cp, cc, &ex.x)?;
    let ce = weighted_ce_loss(&ex.valid, &ex.rain, &logits.data, class_weights)?;
    if ce.count > 0 {
        unet_backward(cp, cc, &cache, Tensor::from_vec(2, h, w, ce.grad), &mut gc, false);
    }
    drop(cache);

    let rain = ex.rain.iter().filter(|&&r| r).count();
    let mut reg = 0.0;
    if rain > 0 {
        let (pred, cache) = unet_forward_cached(rp, rc, &ex.x)?;
        let weights: Vec<T> = ex.weight.iter().zip(&ex.rain).filter(|(_, &r)| r).map(|(&w, _)| w).collect();
        let loss = lds_weighted_regression_loss(&ex.rain, &ex.z, &pred.data, &weights)?;
        reg = loss.value;
        unet_backward(rp, rc, &cache, Tensor::from_vec(1, h, w, loss.grad), &mut gr, false);
    }
    Ok(ExampleGrads {
        classifier: gc,
        regressor: gr,
        ce: ce.value,
        reg,
        valid: ce.count,
        rain,
    })
}

/// Pooled per-cell classifier and regression losses of `model` on
/// `examples`: each is a sum over cells divided by the pooled cell count.
pub fn validation_loss(
    model: &TwoStageModel,
    examples: &[Example<f32>],
    class_weights: [f64; 2],
    exec: Execution,
) -> Result<(f64, f64)> {
    let parts = exec.map(examples, |ex| -> Result<(f64, usize, f64, usize)> {
        let c = &model.classifier;
        let logits = unet_forward(&c.params, &c.config, &ex.x)?;
        let ce = weighted_ce_loss(&ex.valid, &ex.rain, &logits.data, class_weights)?;
        let rain = ex.rain.iter().filter(|&&r| r).count();
        if rain == 0 {
            return Ok((ce.value, ce.count, 0.0, 0));
        }
        let r = &model.regressor;
        let pred = unet_forward(&r.params, &r.config, &ex.x)?;
        let weights: Vec<f32> = ex.weight.iter().zip(&ex.rain).filter(|(_, &r)| r).map(|(&w, _)| w).collect();
        let reg = lds_weighted_regression_loss(&ex.rain, &ex.z, &pred.data, &weights)?;
        Ok((ce.value, ce.count, reg.value, reg.count))
    });
    let (mut ce, mut nv, mut reg, mut nr) = (0.0, 0usize, 0.0, 0usize);
    for p in parts {
        let (a, b, c, d) = p?;
        ce += a;
        nv += b;
        reg += c;
        nr += d;
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    Ok((mean(ce, nv), mean(reg, nr)))
}
