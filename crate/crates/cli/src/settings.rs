//! Config files for the subcommands. Every file is flat `key = value` text;
//! unknown keys are rejected.

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use oya::ablation::AblationSettings;
use oya::grid::store::parse_time;
use oya::grid::{GridSpec, Timestamp};
use oya::kv::KvDoc;
use oya::mosaic::DEFAULT_MAX_VIEW_RADIUS;
use oya::synth::{SynthConfig, Target};
use oya::training::TrainConfig;

use crate::Common;

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| anyhow!("cannot parse `{key}` value `{v}`"))
}

fn load(path: Option<&Path>) -> Result<Option<KvDoc>> {
    path.map(|p| KvDoc::read(p).with_context(|| format!("reading config {}", p.display())))
        .transpose()
}

fn for_each_entry(doc: Option<&KvDoc>, mut f: impl FnMut(&str, &str) -> Result<bool>) -> Result<()> {
    if let Some(doc) = doc {
        for (k, v) in doc.entries() {
            if !f(k, v)? {
                bail!("unknown config key `{k}`");
            }
        }
    }
    Ok(())
}

/// `0.2,1,2.4,7` style list.
pub fn thresholds(text: Option<&str>) -> Result<Vec<f64>> {
    match text {
        None => Ok(oya::dataset::IntensityThresholds::default().as_vec()),
        Some(t) => t
            .split(',')
            .map(|s| parse::<f64>("thresholds", s.trim()))
            .collect(),
    }
}

/// `2016-2021,2023` style year list.
pub fn years(text: &str) -> Result<BTreeSet<i32>> {
    let mut out = BTreeSet::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (i32, i32) = (parse("years", a.trim())?, parse("years", b.trim())?);
                if a > b {
                    bail!("empty year range `{part}`");
                }
                out.extend(a..=b);
            }
            None => {
                out.insert(parse("years", part)?);
            }
        }
    }
    Ok(out)
}

pub fn grid(common: &Common) -> Result<GridSpec> {
    match &common.grid_spec {
        Some(p) => GridSpec::read(p).with_context(|| format!("reading grid spec {}", p.display())),
        None => Ok(GridSpec::global()),
    }
}

fn target(v: &str) -> Result<Target> {
    match v {
        "swath" => Ok(Target::Swath),
        "dense" => Ok(Target::Dense),
        "noisy" => Ok(Target::DenseNoisy),
        _ => bail!("target must be swath, dense or noisy, got `{v}`"),
    }
}

fn synth_key(cfg: &mut SynthConfig, window: &mut usize, k: &str, v: &str) -> Result<bool> {
    match k {
        "channels" => cfg.channels = parse(k, v)?,
        "correlation_length" => cfg.correlation_length = parse(k, v)?,
        "t_c" => cfg.rain_law.t_c = parse(k, v)?,
        "alpha" => cfg.rain_law.alpha = parse(k, v)?,
        "gamma" => cfg.rain_law.gamma = parse(k, v)?,
        "swath_width" => cfg.swath_width = parse(k, v)?,
        "noise_level" => cfg.noise_level = parse(k, v)?,
        "start_time" => cfg.start_time = parse_time(v)?,
        "window" => *window = parse(k, v)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn place_window(cfg: &mut SynthConfig, parent: &GridSpec, window: usize) -> Result<()> {
    cfg.grid = parent
        .sub_window(0, 0, window, window)
        .with_context(|| format!("a {window}-cell window does not fit the grid"))?;
    Ok(())
}

pub struct SynthSettings {
    pub cfg: SynthConfig,
    pub parent: GridSpec,
    pub count: usize,
    pub target: Target,
    pub stream: u64,
    pub split: String,
}

pub fn synth(common: &Common, count: Option<usize>, tgt: Option<&str>) -> Result<SynthSettings> {
    let doc = load(common.config.as_deref())?;
    let parent = grid(common)?;
    let mut s = SynthSettings {
        cfg: SynthConfig::default(),
        parent,
        count: 400,
        target: Target::Swath,
        stream: 0,
        split: "all".into(),
    };
    let mut window = s.cfg.grid.rows;
    for_each_entry(doc.as_ref(), |k, v| {
        if synth_key(&mut s.cfg, &mut window, k, v)? {
            return Ok(true);
        }
        match k {
            "seed" => s.cfg.seed = parse(k, v)?,
            "count" => s.count = parse(k, v)?,
            "target" => s.target = target(v)?,
            "stream" => s.stream = parse(k, v)?,
            "split" => s.split = v.to_string(),
            _ => return Ok(false),
        }
        Ok(true)
    })?;
    if let Some(seed) = common.seed {
        s.cfg.seed = seed;
    }
    if let Some(c) = count {
        s.count = c;
    }
    if let Some(t) = tgt {
        s.target = target(t)?;
    }
    place_window(&mut s.cfg, &s.parent, window)?;
    s.cfg.validate()?;
    Ok(s)
}

pub struct DatasetSettings {
    pub patch: usize,
    pub train_years: BTreeSet<i32>,
    pub validation_years: BTreeSet<i32>,
}

pub fn dataset(common: &Common, patch: Option<usize>) -> Result<DatasetSettings> {
    let doc = load(common.config.as_deref())?;
    let mut s = DatasetSettings {
        patch: 128,
        train_years: years("2016-2021")?,
        validation_years: years("2022")?,
    };
    for_each_entry(doc.as_ref(), |k, v| {
        match k {
            "patch" => s.patch = parse(k, v)?,
            "train_years" => s.train_years = years(v)?,
            "validation_years" => s.validation_years = years(v)?,
            _ => return Ok(false),
        }
        Ok(true)
    })?;
    if let Some(p) = patch {
        s.patch = p;
    }
    Ok(s)
}

pub fn train(common: &Common) -> Result<TrainConfig> {
    let mut cfg = match &common.config {
        Some(p) => TrainConfig::read(p).with_context(|| format!("reading config {}", p.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub struct Satellite {
    pub id: String,
    pub sub_longitude: f64,
    pub max_view_radius: f64,
}

pub struct MosaicSettings {
    pub satellites: Vec<Satellite>,
    pub time_steps: usize,
    pub interval_minutes: i64,
    pub start_time: Timestamp,
    pub tile: usize,
    pub synth: SynthConfig,
}

pub fn mosaic(common: &Common) -> Result<MosaicSettings> {
    let doc = load(common.config.as_deref())?;
    let mut s = MosaicSettings {
        satellites: Vec::new(),
        time_steps: 1,
        interval_minutes: 15,
        start_time: SynthConfig::default().start_time,
        tile: 256,
        synth: SynthConfig::default(),
    };
    let mut window = 0;
    for_each_entry(doc.as_ref(), |k, v| {
        if synth_key(&mut s.synth, &mut window, k, v)? {
            if k == "window" {
                bail!("mosaic scenes always cover the whole grid");
            }
            return Ok(true);
        }
        match k {
            "satellite" => {
                let f: Vec<&str> = v.split('|').map(str::trim).collect();
                if !(2..=3).contains(&f.len()) {
                    bail!("satellite must be `id|sub_longitude[|max_view_radius]`, got `{v}`");
                }
                s.satellites.push(Satellite {
                    id: f[0].to_string(),
                    sub_longitude: parse(k, f[1])?,
                    max_view_radius: f.get(2).map(|r| parse(k, r)).transpose()?.unwrap_or(DEFAULT_MAX_VIEW_RADIUS),
                });
            }
            "time_steps" => s.time_steps = parse(k, v)?,
            "interval_minutes" => s.interval_minutes = parse(k, v)?,
            "start_time" => s.start_time = parse_time(v)?,
            "tile" => s.tile = parse(k, v)?,
            _ => return Ok(false),
        }
        Ok(true)
    })?;
    if s.satellites.is_empty() {
        for (id, lon) in [("GOES-W", -137.2), ("GOES-E", -75.2), ("MSG", 0.0), ("MSG-IODC", 45.5), ("HIMAWARI", 140.7)] {
            s.satellites.push(Satellite {
                id: id.into(),
                sub_longitude: lon,
                max_view_radius: DEFAULT_MAX_VIEW_RADIUS,
            });
        }
    }
    if let Some(seed) = common.seed {
        s.synth.seed = seed;
    }
    Ok(s)
}

pub fn ablation(common: &Common, steps: Option<u64>) -> Result<AblationSettings> {
    let doc = load(common.config.as_deref())?;
    let mut s = AblationSettings::default();
    let parent = grid(common)?;
    let mut window = s.synth.grid.rows;
    let mut synth_channels = None;
    for_each_entry(doc.as_ref(), |k, v| {
        match k {
            "train_scenes" => s.train_scenes = parse(k, v)?,
            "val_scenes" => s.val_scenes = parse(k, v)?,
            "pretrain_pairs" => s.pretrain_pairs = parse(k, v)?,
            "pretrain_noise" => s.pretrain_noise = parse(k, v)?,
            "baseline_patch" => s.baseline_patch = parse(k, v)?,
            "eval_crop" => s.eval_crop = parse(k, v)?,
            "scene_size" => window = parse(k, v)?,
            "synth_channels" => synth_channels = Some(parse(k, v)?),
            _ => {
                s.train.apply(k, v)?;
            }
        }
        Ok(true)
    })?;
    if let Some(c) = synth_channels {
        s.synth.channels = c;
    }
    if let Some(seed) = common.seed {
        s.synth.seed = seed;
        s.train.seed = seed;
    }
    if let Some(n) = steps {
        s.train.steps = n;
    }
    place_window(&mut s.synth, &parent, window)?;
    s.synth.validate()?;
    s.train.validate()?;
    Ok(s)
}
