use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::nn::{
    concat_channels, conv_backward, conv_forward, maxpool2_backward, maxpool2_forward, split_channels,
    upsample2_backward, upsample2_forward, ConvShape, PoolIndex, Scalar, Tensor,
};
use crate::{Error, Result};

/// U-Net shape. Encoder level `k` has `base_width · 2^k` channels, the
/// bottleneck sits below `depth` poolings, and decoder level `k` joins the
/// upsampled level `k + 1` with the encoder's level-`k` skip by channel
/// concatenation. Every level is two 3×3 convolutions with ReLU; a 1×1 head
/// produces `out_channels` linear outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UNetConfig {
    pub in_channels: usize,
    pub depth: usize,
    pub base_width: usize,
    pub out_channels: usize,
}

impl UNetConfig {
    pub const DEFAULT_DEPTH: usize = 4;
    pub const DEFAULT_BASE_WIDTH: usize = 32;

    /// Rain/no-rain detector: two logits, no-rain first.
    pub fn classifier(in_channels: usize) -> Self {
        UNetConfig {
            in_channels,
            depth: Self::DEFAULT_DEPTH,
            base_width: Self::DEFAULT_BASE_WIDTH,
            out_channels: 2,
        }
    }

    /// Log-rate regressor.
    pub fn regressor(in_channels: usize) -> Self {
        UNetConfig {
            out_channels: 1,
            ..Self::classifier(in_channels)
        }
    }

    pub fn with_size(self, depth: usize, base_width: usize) -> Self {
        UNetConfig {
            depth,
            base_width,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.depth == 0 || self.base_width == 0 || self.out_channels == 0 {
            return Err(Error::Config(format!("degenerate U-Net config {self:?}")));
        }
        if self.depth > 8 {
            return Err(Error::Config(format!("U-Net depth {} is unreasonably deep", self.depth)));
        }
        Ok(())
    }

    fn width(&self, level: usize) -> usize {
        self.base_width << level
    }

    /// Spatial sizes must be divisible by `2^depth`.
    pub fn check_input(&self, c: usize, h: usize, w: usize) -> Result<()> {
        let m = 1usize << self.depth;
        if c != self.in_channels {
            return Err(Error::Shape(format!("input has {c} channels, network expects {}", self.in_channels)));
        }
        if h == 0 || w == 0 || !h.is_multiple_of(m) || !w.is_multiple_of(m) {
            return Err(Error::Shape(format!("input {h}x{w} is not divisible by 2^{} = {m}", self.depth)));
        }
        Ok(())
    }

    /// Convolutions in execution order.
    pub fn layers(&self) -> Vec<(String, ConvShape)> {
        let conv = |cin, cout| ConvShape { cin, cout, kernel: 3 };
        let mut out = Vec::new();
        let mut cin = self.in_channels;
        for k in 0..self.depth {
            out.push((format!("enc{k}.conv1"), conv(cin, self.width(k))));
            out.push((format!("enc{k}.conv2"), conv(self.width(k), self.width(k))));
            cin = self.width(k);
        }
        let d = self.depth;
        out.push(("bottleneck.conv1".into(), conv(cin, self.width(d))));
        out.push(("bottleneck.conv2".into(), conv(self.width(d), self.width(d))));
        for k in (0..d).rev() {
            out.push((format!("dec{k}.conv1"), conv(self.width(k + 1) + self.width(k), self.width(k))));
            out.push((format!("dec{k}.conv2"), conv(self.width(k), self.width(k))));
        }
        out.push((
            "head".into(),
            ConvShape {
                cin: self.base_width,
                cout: self.out_channels,
                kernel: 1,
            },
        ));
        out
    }

    /// Parameter layout: for every layer, `<layer>.weight` of shape
    /// `[cout, cin, k, k]` immediately followed by `<layer>.bias` of `[cout]`.
    pub fn layout(&self) -> Vec<ParamEntry> {
        let mut entries = Vec::new();
        let mut offset = 0;
        for (name, s) in self.layers() {
            entries.push(ParamEntry {
                name: format!("{name}.weight"),
                shape: vec![s.cout, s.cin, s.kernel, s.kernel],
                offset,
            });
            offset += s.weight_len();
            entries.push(ParamEntry {
                name: format!("{name}.bias"),
                shape: vec![s.cout],
                offset,
            });
            offset += s.cout;
        }
        entries
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(_, s)| s.weight_len() + s.cout).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Named parameter arrays stored in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    entries: Vec<ParamEntry>,
    values: Vec<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// He-normal weights, zero biases. The head uses unit-gain variance.
    pub fn init<R: Rng + ?Sized>(cfg: &UNetConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let entries = cfg.layout();
        let mut values = Vec::with_capacity(cfg.param_count());
        for (name, s) in cfg.layers() {
            let fan_in = (s.cin * s.kernel * s.kernel) as f64;
            let gain = if name == "head" { 1.0 } else { 2.0 };
            let normal = Normal::new(0.0, (gain / fan_in).sqrt()).expect("positive std");
            values.extend((0..s.weight_len()).map(|_| T::of(normal.sample(rng))));
            values.extend((0..s.cout).map(|_| T::zero()));
        }
        Ok(ModelParams { entries, values })
    }

    /// Wraps a flat buffer, checking it against `cfg`'s layout.
    pub fn from_values(cfg: &UNetConfig, values: Vec<T>) -> Result<Self> {
        cfg.validate()?;
        if values.len() != cfg.param_count() {
            return Err(Error::Shape(format!(
                "{} parameter values for a network with {}",
                values.len(),
                cfg.param_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite parameter value".into()));
        }
        Ok(ModelParams {
            entries: cfg.layout(),
            values,
        })
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            entries: self.entries.clone(),
            values: vec![T::zero(); self.values.len()],
        }
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&[T]> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| &self.values[e.offset..e.offset + e.len()])
    }

    /// Checks that the layout agrees with `cfg`.
    pub fn check(&self, cfg: &UNetConfig) -> Result<()> {
        if self.entries != cfg.layout() || self.values.len() != cfg.param_count() {
            return Err(Error::Shape(format!("parameters do not match config {cfg:?}")));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            entries: self.entries.clone(),
            values: self.values.iter().map(|v| U::of(v.to_f64().unwrap_or(f64::NAN))).collect(),
        }
    }
}

struct Block<T> {
    input: Tensor<T>,
    mid: Tensor<T>,
    out: Tensor<T>,
}

/// Activations kept for the backward pass.
pub struct ForwardCache<T> {
    enc: Vec<Block<T>>,
    pools: Vec<PoolIndex>,
    bottleneck: Block<T>,
    /// Indexed by level.
    dec: Vec<Option<Block<T>>>,
}

struct Layer<'a, T> {
    shape: ConvShape,
    weight: &'a [T],
    bias: &'a [T],
    offset: usize,
}

fn resolve<'a, T: Scalar>(cfg: &UNetConfig, params: &'a ModelParams<T>) -> Vec<Layer<'a, T>> {
    let mut offset = 0;
    cfg.layers()
        .into_iter()
        .map(|(_, shape)| {
            let w = shape.weight_len();
            let layer = Layer {
                shape,
                weight: &params.values[offset..offset + w],
                bias: &params.values[offset + w..offset + w + shape.cout],
                offset,
            };
            offset += w + shape.cout;
            layer
        })
        .collect()
}

fn run_block<T: Scalar>(input: Tensor<T>, a: &Layer<T>, b: &Layer<T>) -> Block<T> {
    let mid = conv_forward(&input, a.weight, a.bias, a.shape, true);
    let out = conv_forward(&mid, b.weight, b.bias, b.shape, true);
    Block { input, mid, out }
}

fn back_block<T: Scalar>(
    blk: &Block<T>,
    d_out: Tensor<T>,
    a: &Layer<T>,
    b: &Layer<T>,
    grads: &mut [T],
    need_dx: bool,
) -> Option<Tensor<T>> {
    let d_mid = conv_backward_into(&blk.mid, &blk.out, d_out, b, grads, true).expect("dx requested");
    conv_backward_into(&blk.input, &blk.mid, d_mid, a, grads, need_dx)
}

fn conv_backward_into<T: Scalar>(
    x: &Tensor<T>,
    y: &Tensor<T>,
    dy: Tensor<T>,
    layer: &Layer<T>,
    grads: &mut [T],
    need_dx: bool,
) -> Option<Tensor<T>> {
    let w = layer.shape.weight_len();
    let (dw, db) = grads[layer.offset..layer.offset + w + layer.shape.cout].split_at_mut(w);
    conv_backward(x, y, dy, layer.weight, layer.shape, true, dw, db, need_dx)
}

/// Forward pass keeping activations for [`unet_backward`].
pub fn unet_forward_cached<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &UNetConfig,
    x: &Tensor<T>,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    cfg.check_input(x.c, x.h, x.w)?;
    params.check(cfg)?;
    let layers = resolve(cfg, params);
    let d = cfg.depth;
    let mut enc = Vec::with_capacity(d);
    let mut pools = Vec::with_capacity(d);
    let mut cur = x.clone();
    for k in 0..d {
        let blk = run_block(cur, &layers[2 * k], &layers[2 * k + 1]);
        let (pooled, idx) = maxpool2_forward(&blk.out);
        enc.push(blk);
        pools.push(idx);
        cur = pooled;
    }
    let bottleneck = run_block(cur, &layers[2 * d], &layers[2 * d + 1]);
    let mut dec: Vec<Option<Block<T>>> = (0..d).map(|_| None).collect();
    let mut below = &bottleneck.out;
    for (i, k) in (0..d).rev().enumerate() {
        let up = upsample2_forward(below);
        let cat = concat_channels(&up, &enc[k].out);
        let li = 2 * d + 2 + 2 * i;
        dec[k] = Some(run_block(cat, &layers[li], &layers[li + 1]));
        below = &dec[k].as_ref().expect("just set").out;
    }
    let head = layers.last().expect("head layer");
    let out = conv_forward(below, head.weight, head.bias, head.shape, false);
    Ok((
        out,
        ForwardCache {
            enc,
            pools,
            bottleneck,
            dec,
        },
    ))
}

/// Inference forward pass: output has the input's spatial shape and
/// `cfg.out_channels` channels.
pub fn unet_forward<T: Scalar>(params: &ModelParams<T>, cfg: &UNetConfig, x: &Tensor<T>) -> Result<Tensor<T>> {
    unet_forward_cached(params, cfg, x).map(|(out, _)| out)
}

/// Backpropagates `d_out` (gradient of the loss w.r.t. the network output),
/// accumulating parameter gradients into `grads` (same layout as the
/// parameters). Returns the input gradient when `need_input_grad` is set.
pub fn unet_backward<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &UNetConfig,
    cache: &ForwardCache<T>,
    d_out: Tensor<T>,
    grads: &mut [T],
    need_input_grad: bool,
) -> Option<Tensor<T>> {
    assert_eq!(grads.len(), params.len(), "gradient buffer size");
    let layers = resolve(cfg, params);
    let d = cfg.depth;
    let head = layers.last().expect("head layer");
    let top = &cache.dec[0].as_ref().expect("decoder level 0").out;
    let w = head.shape.weight_len();
    let (dw, db) = grads[head.offset..head.offset + w + head.shape.cout].split_at_mut(w);
    let mut d_below = conv_backward(top, &Tensor::zeros(0, 0, 0), d_out, head.weight, head.shape, false, dw, db, true)
        .expect("dx requested");

    let mut d_skip: Vec<Option<Tensor<T>>> = (0..d).map(|_| None).collect();
    for (k, slot) in d_skip.iter_mut().enumerate() {
        let li = 2 * d + 2 + 2 * (d - 1 - k);
        let blk = cache.dec[k].as_ref().expect("decoder level");
        let d_cat = back_block(blk, d_below, &layers[li], &layers[li + 1], grads, true).expect("dx requested");
        let up_channels = cfg.width(k + 1);
        let (d_up, d_sk) = split_channels(d_cat, up_channels);
        *slot = Some(d_sk);
        d_below = upsample2_backward(&d_up);
    }
    let mut d_in = back_block(&cache.bottleneck, d_below, &layers[2 * d], &layers[2 * d + 1], grads, true)
        .expect("dx requested");
    for k in (0..d).rev() {
        let blk = &cache.enc[k];
        let mut d_out_k = d_skip[k].take().expect("skip gradient");
        maxpool2_backward(&d_in, &cache.pools[k], &mut d_out_k);
        let need = k > 0 || need_input_grad;
        d_in = back_block(blk, d_out_k, &layers[2 * k], &layers[2 * k + 1], grads, need)?;
    }
    Some(d_in)
}
