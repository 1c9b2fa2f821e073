//! Procedural (scene, swath) pairs with a known channel → rain law.
//!
//! Each channel is an affine image of a smoothed gaussian signal. Signals mix
//! neighbouring latent fields, `s_k = (u_k + u_{k+1} / 2) / √1.25`, so every
//! channel shares structure with the next one. Rain depends on the longwave
//! window channel `IR_108` and the secondary channel `WV_062` through a
//! blended brightness temperature
//!
//! ```text
//! b = 250 + (T_108 − 250 + T_062 − 250) / √2.8
//! rate = α · max(0, T_c − b)^γ
//! ```
//!
//! which has the same 15 K spread as the channels. Neither channel alone
//! determines `b`, so all-channel models can beat longwave-only ones.

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::{
    collocate, ChannelCategory, ChannelDescriptor, GeoScene, GridSpec, GriddedPair, PatchRecord, PrecipSample,
    PrecipSwath, Timestamp,
};
use crate::{Error, Execution, Result};

/// Duration of one synthetic scan.
pub const SCAN_MINUTES: i64 = 15;

/// Parameters of `rate = alpha · max(0, t_c − b)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RainLaw {
    /// Brightness temperature below which it rains (K).
    pub t_c: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for RainLaw {
    /// About 13% of cells reach 0.2 mm/h and about 1% reach 7 mm/h.
    fn default() -> Self {
        RainLaw {
            t_c: 235.0,
            alpha: 0.079,
            gamma: 1.5,
        }
    }
}

impl RainLaw {
    pub fn rate(&self, b: f64) -> f64 {
        self.alpha * (self.t_c - b).max(0.0).powf(self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    /// Window the scene covers.
    pub grid: GridSpec,
    pub channels: usize,
    /// Gaussian smoothing scale of the latent fields, in cells.
    pub correlation_length: f64,
    pub rain_law: RainLaw,
    /// Cells per row covered by the swath.
    pub swath_width: usize,
    /// Lognormal sigma of the dense noisy targets; also scales the false
    /// rain speckle probability.
    pub noise_level: f64,
    pub start_time: Timestamp,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            grid: GridSpec::global()
                .sub_window(1300, 4000, 64, 64)
                .expect("window inside global grid"),
            channels: 8,
            correlation_length: 5.0,
            rain_law: RainLaw::default(),
            swath_width: 25,
            noise_level: 0.0,
            start_time: Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).single().expect("valid date"),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let n = ChannelDescriptor::catalog().len();
        if self.channels == 0 || self.channels > n {
            return Err(Error::Config(format!("channels must lie in 1..={n}, got {}", self.channels)));
        }
        if self.swath_width == 0 {
            return Err(Error::Config("swath_width must be >= 1".into()));
        }
        if !(self.correlation_length > 0.0 && self.correlation_length.is_finite()) {
            return Err(Error::Config("correlation_length must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.noise_level) {
            return Err(Error::Config(format!("noise_level must lie in [0, 1), got {}", self.noise_level)));
        }
        let l = self.rain_law;
        if ![l.t_c, l.alpha, l.gamma].iter().all(|v| v.is_finite()) || l.alpha <= 0.0 || l.gamma <= 0.0 {
            return Err(Error::Config(format!("invalid rain law {l:?}")));
        }
        Ok(())
    }

    pub fn channel_descriptors(&self) -> Vec<ChannelDescriptor> {
        ChannelDescriptor::catalog().into_iter().take(self.channels).collect()
    }
}

/// Output of [`generate_pair`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPair {
    pub scene: GeoScene,
    pub swath: PrecipSwath,
    /// Noise-free rate on every cell of the window, mm/h.
    pub dense_truth: Vec<f64>,
}

fn channel_affine(category: ChannelCategory) -> (f64, f64) {
    match category {
        ChannelCategory::Ir => (250.0, 15.0),
        ChannelCategory::Visible | ChannelCategory::NearIr => (0.3, 0.15),
    }
}

/// Circular separable gaussian blur of unit-variance white noise, rescaled
/// so the result again has unit variance.
fn smooth_field(rng: &mut ChaCha8Rng, rows: usize, cols: usize, sigma: f64) -> Vec<f64> {
    let white: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    let radius = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().map(|k| k * k).sum();
    let wrap = |i: i64, n: usize| i.rem_euclid(n as i64) as usize;
    let mut tmp = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            tmp[r * cols + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * white[r * cols + wrap(c as i64 + k as i64 - radius, cols)])
                .sum();
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let v: f64 = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * tmp[wrap(r as i64 + k as i64 - radius, rows) * cols + c])
                .sum();
            out[r * cols + c] = v / norm;
        }
    }
    out
}

/// Blended brightness temperature from the stored `IR_108` and `WV_062`
/// values.
pub fn blended_temperature(t108: f32, t062: f32) -> f64 {
    250.0 + ((t108 as f64 - 250.0) + (t062 as f64 - 250.0)) / 2.8f64.sqrt()
}

/// One synthetic scene over `cfg.grid`, its dense truth, and a straight
/// swath of `swath_width` cells per row crossing the window at a random
/// angle within 60° of north–south. Every swath cell gets one sample at its
/// center, so rasterizing the swath reproduces the dense truth there.
pub fn generate_pair(cfg: &SynthConfig) -> Result<SynthPair> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (rows, cols) = (cfg.grid.rows, cfg.grid.cols);
    let signals = cfg.channels.max(2);
    let latents: Vec<Vec<f64>> = (0..=signals)
        .map(|_| smooth_field(&mut rng, rows, cols, cfg.correlation_length))
        .collect();
    let catalog = ChannelDescriptor::catalog();
    let mut values: Vec<Vec<f32>> = Vec::with_capacity(signals);
    for k in 0..signals {
        let (base, spread) = channel_affine(catalog[k].category);
        values.push(
            latents[k]
                .iter()
                .zip(&latents[k + 1])
                .map(|(a, b)| (base + spread * (a + 0.5 * b) / 1.25f64.sqrt()) as f32)
                .collect(),
        );
    }
    let dense_truth: Vec<f64> = values[0]
        .iter()
        .zip(&values[1])
        .map(|(&a, &b)| cfg.rain_law.rate(blended_temperature(a, b)))
        .collect();

    let t_start = cfg.start_time;
    let t_end = t_start + Duration::minutes(SCAN_MINUTES);
    let angle = rng.random_range(-60.0f64..60.0).to_radians();
    let (r0, c0) = (rng.random_range(0.0..rows as f64), rng.random_range(0.0..cols as f64));
    let mut samples = Vec::new();
    for r in 0..rows {
        let center = c0 + (r as f64 + 0.5 - r0) * angle.tan();
        let first = (center - cfg.swath_width as f64 / 2.0).round() as i64;
        let time = t_start + Duration::milliseconds(((r as f64 + 0.5) / rows as f64 * SCAN_MINUTES as f64 * 60e3) as i64);
        for c in first..first + cfg.swath_width as i64 {
            if (0..cols as i64).contains(&c) {
                let (lat, lon) = cfg.grid.cell_center(r, c as usize);
                samples.push(PrecipSample {
                    lat,
                    lon,
                    time,
                    rate: dense_truth[r * cols + c as usize],
                });
            }
        }
    }
    let data: Vec<f32> = values.into_iter().take(cfg.channels).flatten().collect();
    Ok(SynthPair {
        scene: GeoScene::new(t_start, t_end, cfg.grid, cfg.channel_descriptors(), data)?,
        swath: PrecipSwath::new(samples)?,
        dense_truth,
    })
}

/// Dense, all-valid target: the truth under multiplicative lognormal noise
/// `exp(σz − σ²/2)` with `σ = noise_level`, plus false-rain speckle on dry
/// cells with probability `0.05 · noise_level`. Noise draws come from their
/// own stream, so fixed seeds give nested corruptions as the level grows.
pub fn generate_dense_noisy(cfg: &SynthConfig) -> Result<GriddedPair> {
    let pair = generate_pair(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let sigma = cfg.noise_level;
    let y: Vec<f32> = pair
        .dense_truth
        .iter()
        .map(|&t| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let u: f64 = rng.random();
            let speck: f64 = StandardNormal.sample(&mut rng);
            if sigma == 0.0 {
                return t as f32;
            }
            let noisy = t * (sigma * z - sigma * sigma / 2.0).exp();
            let false_rain = if t == 0.0 && u < 0.05 * sigma {
                (0.5f64.ln() + 0.5 * speck).exp()
            } else {
                0.0
            };
            (noisy + false_rain) as f32
        })
        .collect();
    let g = cfg.grid;
    GriddedPair::new(g.rows, g.cols, cfg.channels, pair.scene.data, y, vec![true; g.cells()])
}

/// Which kind of target a corpus carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Rasterized swath samples.
    Swath,
    /// Noise-free truth on every cell.
    Dense,
    /// Truth with `noise_level` corruption on every cell.
    DenseNoisy,
}

fn mix(seed: u64, stream: u64, index: u64) -> u64 {
    // SplitMix64 finalizer over the combined words.
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(index.wrapping_mul(0x94D0_49BB_1331_11EB))
        .wrapping_add(0x2545_F491_4F6C_DD1D);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n` independent `rows × cols` records at random places on `parent` and
/// random times in the year after `base.start_time`. Record `i` depends only
/// on `(base.seed, stream, i)`, so distinct streams give disjoint corpora.
pub fn generate_corpus(
    base: &SynthConfig,
    parent: &GridSpec,
    n: usize,
    stream: u64,
    target: Target,
    exec: Execution,
) -> Result<Vec<PatchRecord>> {
    base.validate()?;
    let (rows, cols) = (base.grid.rows, base.grid.cols);
    if rows > parent.rows || cols > parent.cols {
        return Err(Error::Shape("synthetic window exceeds the parent grid".into()));
    }
    exec.map_range(n, |i| {
        let seed = mix(base.seed, stream, i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let origin = (rng.random_range(0..=parent.rows - rows), rng.random_range(0..=parent.cols - cols));
        let slot = rng.random_range(0..365 * 24 * 60 / SCAN_MINUTES);
        let cfg = SynthConfig {
            seed,
            grid: parent.sub_window(origin.0, origin.1, rows, cols)?,
            start_time: base.start_time + Duration::minutes(slot * SCAN_MINUTES),
            ..base.clone()
        };
        let t_start = cfg.start_time;
        let t_end = t_start + Duration::minutes(SCAN_MINUTES);
        let pair = match target {
            Target::Swath => {
                let p = generate_pair(&cfg)?;
                collocate(&p.scene, &p.swath, &cfg.grid)?
            }
            Target::Dense => {
                let p = generate_pair(&cfg)?;
                let y = p.dense_truth.iter().map(|&v| v as f32).collect();
                GriddedPair::new(rows, cols, cfg.channels, p.scene.data, y, vec![true; rows * cols])?
            }
            Target::DenseNoisy => generate_dense_noisy(&cfg)?,
        };
        Ok(PatchRecord {
            origin,
            t_start,
            t_end,
            pair,
        })
    })
    .into_iter()
    .collect()
}
