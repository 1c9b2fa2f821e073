use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::dataset::{LdsConfig, LdsKernel};
use crate::kv::{KvDoc, KvWriter};
use crate::model::CombineMode;
use crate::{Error, Result};

use super::optim::AdamConfig;

/// Which protocol a training run follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Dense noisy targets, producing a `pretrained` checkpoint.
    Pretrain,
    /// Sparse targets starting from a pretrained checkpoint.
    Finetune,
    /// Sparse targets from random initialization.
    Scratch,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Pretrain => "pretrain",
            Stage::Finetune => "finetune",
            Stage::Scratch => "scratch",
        })
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain" => Ok(Stage::Pretrain),
            "finetune" => Ok(Stage::Finetune),
            "scratch" => Ok(Stage::Scratch),
            _ => Err(Error::Config(format!("unknown stage `{s}`"))),
        }
    }
}

/// Classifier label weights (no-rain, rain).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassWeights {
    /// Inverse class frequency on the training split, renormalized to mean 1.
    Auto,
    Fixed([f64; 2]),
}

impl fmt::Display for ClassWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassWeights::Auto => f.write_str("auto"),
            ClassWeights::Fixed([a, b]) => write!(f, "{a},{b}"),
        }
    }
}

impl FromStr for ClassWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(ClassWeights::Auto);
        }
        let bad = || Error::Config(format!("class_weights must be `auto` or `w_norain,w_rain`, got `{s}`"));
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        Ok(ClassWeights::Fixed([a, b]))
    }
}

/// Training hyperparameters. In config files every key is the field name.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub steps: u64,
    pub seed: u64,
    pub class_weights: ClassWeights,
    pub decision_threshold: f64,
    pub stage: Stage,
    /// Soft product instead of the hard detection gate.
    pub soft_combine: bool,
    /// Random flips and rotations per example.
    pub augment: bool,
    /// LDS re-weighting of the regression loss.
    pub lds: bool,
    pub lds_bin_width: f64,
    pub lds_kernel: LdsKernel,
    pub lds_bandwidth: f64,
    pub lds_clip: f64,
    /// Input channel names; empty selects every channel of the dataset.
    pub channels: Vec<String>,
    pub depth: usize,
    pub base_width: usize,
    /// Steps between observer callbacks.
    pub eval_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let lds = LdsConfig::default();
        let adam = AdamConfig::default();
        TrainConfig {
            learning_rate: adam.learning_rate,
            weight_decay: adam.weight_decay,
            batch_size: 8,
            steps: 2000,
            seed: 0,
            class_weights: ClassWeights::Auto,
            decision_threshold: 0.5,
            stage: Stage::Scratch,
            soft_combine: false,
            augment: true,
            lds: true,
            lds_bin_width: lds.bin_width,
            lds_kernel: lds.kernel,
            lds_bandwidth: lds.bandwidth,
            lds_clip: lds.clip_weight_max,
            channels: Vec::new(),
            depth: Self::DEFAULT_DEPTH,
            base_width: Self::DEFAULT_BASE_WIDTH,
            eval_every: 100,
        }
    }
}

const KEYS: [&str; 19] = [
    "learning_rate",
    "weight_decay",
    "batch_size",
    "steps",
    "seed",
    "class_weights",
    "decision_threshold",
    "stage",
    "soft_combine",
    "augment",
    "lds",
    "lds_bin_width",
    "lds_kernel",
    "lds_bandwidth",
    "lds_clip",
    "channels",
    "depth",
    "base_width",
    "eval_every",
];

impl TrainConfig {
    /// Desk-scale network size used when a config does not set one.
    pub const DEFAULT_DEPTH: usize = 2;
    pub const DEFAULT_BASE_WIDTH: usize = 8;

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if let ClassWeights::Fixed(w) = self.class_weights {
            if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad(format!("class_weights must be > 0, got {w:?}"));
            }
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return bad(format!("decision_threshold must lie in (0, 1), got {}", self.decision_threshold));
        }
        if self.depth == 0 || self.base_width == 0 || self.eval_every == 0 {
            return bad("depth, base_width and eval_every must be >= 1".into());
        }
        self.lds_config().validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    pub fn lds_config(&self) -> LdsConfig {
        LdsConfig {
            bin_width: self.lds_bin_width,
            kernel: self.lds_kernel,
            bandwidth: self.lds_bandwidth,
            clip_weight_max: self.lds_clip,
        }
    }

    pub fn combine_mode(&self) -> CombineMode {
        if self.soft_combine {
            CombineMode::Soft
        } else {
            CombineMode::Hard {
                threshold: self.decision_threshold,
            }
        }
    }

    /// Applies `key = value` overrides on top of `self`.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn p<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("cannot parse `{key}` value `{v}`")))
        }
        match key {
            "learning_rate" => self.learning_rate = p(key, value)?,
            "weight_decay" => self.weight_decay = p(key, value)?,
            "batch_size" => self.batch_size = p(key, value)?,
            "steps" => self.steps = p(key, value)?,
            "seed" => self.seed = p(key, value)?,
            "class_weights" => self.class_weights = value.parse()?,
            "decision_threshold" => self.decision_threshold = p(key, value)?,
            "stage" => self.stage = value.parse()?,
            "soft_combine" => self.soft_combine = p(key, value)?,
            "augment" => self.augment = p(key, value)?,
            "lds" => self.lds = p(key, value)?,
            "lds_bin_width" => self.lds_bin_width = p(key, value)?,
            "lds_kernel" => self.lds_kernel = value.parse()?,
            "lds_bandwidth" => self.lds_bandwidth = p(key, value)?,
            "lds_clip" => self.lds_clip = p(key, value)?,
            "channels" => {
                self.channels = if value == "all" || value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|s| s.trim().to_string()).collect()
                }
            }
            "depth" => self.depth = p(key, value)?,
            "base_width" => self.base_width = p(key, value)?,
            "eval_every" => self.eval_every = p(key, value)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown training key `{other}`; expected one of {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Parses a config file; unset keys keep their defaults.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let doc = KvDoc::parse(text, path)?;
        let mut cfg = TrainConfig::default();
        for (k, v) in doc.entries() {
            cfg.apply(k, v).map_err(|e| doc.bad(e.to_string()))?;
        }
        cfg.validate().map_err(|e| doc.bad(e.to_string()))?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut w = KvWriter::new();
        let channels = if self.channels.is_empty() {
            "all".to_string()
        } else {
            self.channels.join(",")
        };
        w.put("learning_rate", self.learning_rate)
            .put("weight_decay", self.weight_decay)
            .put("batch_size", self.batch_size)
            .put("steps", self.steps)
            .put("seed", self.seed)
            .put("class_weights", self.class_weights)
            .put("decision_threshold", self.decision_threshold)
            .put("stage", self.stage)
            .put("soft_combine", self.soft_combine)
            .put("augment", self.augment)
            .put("lds", self.lds)
            .put("lds_bin_width", self.lds_bin_width)
            .put("lds_kernel", self.lds_kernel)
            .put("lds_bandwidth", self.lds_bandwidth)
            .put("lds_clip", self.lds_clip)
            .put("channels", channels)
            .put("depth", self.depth)
            .put("base_width", self.base_width)
            .put("eval_every", self.eval_every);
        w.finish()
    }
}
