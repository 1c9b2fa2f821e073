//! Design-choice ablations on the synthetic task: channel subset,
//! augmentation, pretraining, training patch size and LDS re-weighting.
//!
//! Every variant changes one setting of a shared baseline (all channels,
//! augmentation on, no pretraining, 64-cell patches, LDS on), so identical
//! configurations across axes are trained once. All variants are scored on
//! the same central 32 × 32 crop of each validation scene: a model trained on
//! `P`-cell patches predicts a centered `P × P` window and only the crop is
//! counted.

use std::fmt;
use std::str::FromStr;

use crate::dataset::IntensityThresholds;
use crate::eval::{accumulate, merge, metrics, ContingencyTable};
use crate::grid::{tile_patches, GridSpec, GriddedPair, LONGWAVE_WINDOW};
use crate::model::{Checkpoint, TwoStageModel};
use crate::synth::{generate_corpus, SynthConfig, Target};
use crate::training::{train, Control, Stage, TrainConfig};
use crate::{Error, Execution, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Channels,
    Augmentation,
    Pretraining,
    PatchSize,
    Lds,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::Channels, Axis::Augmentation, Axis::Pretraining, Axis::PatchSize, Axis::Lds];
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Channels => "channels",
            Axis::Augmentation => "augmentation",
            Axis::Pretraining => "pretraining",
            Axis::PatchSize => "patch_size",
            Axis::Lds => "lds",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Axis::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation axis `{s}`")))
    }
}

/// One axis and its variant names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AblationSpec {
    pub axis: Axis,
    pub variants: Vec<String>,
}

impl AblationSpec {
    /// The standard variants for `axis`.
    pub fn standard(axis: Axis) -> Self {
        let v: &[&str] = match axis {
            Axis::Channels => &["longwave-only", "all"],
            Axis::Augmentation => &["off", "on"],
            Axis::Pretraining => &["off", "on"],
            Axis::PatchSize => &["32", "64", "128"],
            Axis::Lds => &["off", "on"],
        };
        AblationSpec {
            axis,
            variants: v.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Settings shared by every variant.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationSettings {
    /// Scene generator; its window size is the scene size.
    pub synth: SynthConfig,
    pub train_scenes: usize,
    pub val_scenes: usize,
    /// Dense noisy pairs (baseline patch size) for the pretraining variant.
    pub pretrain_pairs: usize,
    pub pretrain_noise: f64,
    /// Base training config; `stage`, `channels`, `augment` and `lds` are
    /// overridden per variant.
    pub train: TrainConfig,
    pub baseline_patch: usize,
    pub eval_crop: usize,
    pub thresholds: IntensityThresholds,
}

impl Default for AblationSettings {
    fn default() -> Self {
        let synth = SynthConfig {
            grid: GridSpec::global()
                .sub_window(1300, 4000, 128, 128)
                .expect("window inside global grid"),
            ..SynthConfig::default()
        };
        AblationSettings {
            synth,
            train_scenes: 200,
            val_scenes: 50,
            pretrain_pairs: 400,
            pretrain_noise: 0.3,
            train: TrainConfig::default(),
            baseline_patch: 64,
            eval_crop: 32,
            thresholds: IntensityThresholds::default(),
        }
    }
}

/// Scores of one variant: CSI per intensity class (light, medium, heavy,
/// extreme).
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub axis: Axis,
    pub variant: String,
    pub csi: [Option<f64>; 4],
}

#[derive(Debug, Clone, PartialEq)]
struct VariantKey {
    longwave_only: bool,
    augment: bool,
    lds: bool,
    pretrained: bool,
    patch: usize,
}

fn variant_key(axis: Axis, name: &str, s: &AblationSettings) -> Result<VariantKey> {
    let mut k = VariantKey {
        longwave_only: false,
        augment: true,
        lds: true,
        pretrained: false,
        patch: s.baseline_patch,
    };
    let bad = || Error::Config(format!("unknown variant `{name}` for axis {axis}"));
    match (axis, name) {
        (Axis::Channels, "longwave-only") => k.longwave_only = true,
        (Axis::Channels, "all") => {}
        (Axis::Augmentation, "off") => k.augment = false,
        (Axis::Lds, "off") => k.lds = false,
        (Axis::Pretraining, "on") => k.pretrained = true,
        (Axis::Augmentation | Axis::Lds, "on") | (Axis::Pretraining, "off") => {}
        (Axis::PatchSize, p) => k.patch = p.parse().map_err(|_| bad())?,
        _ => return Err(bad()),
    }
    Ok(k)
}

/// Central `crop × crop` block of a prediction on the centered `patch`
/// window of `scene`, together with the matching truth.
fn score_scene(
    model: &TwoStageModel,
    scene: &GriddedPair,
    channels: &[crate::grid::ChannelDescriptor],
    patch: usize,
    crop: usize,
    thresholds: &[f64],
) -> Result<ContingencyTable> {
    let (r0, c0) = ((scene.rows - patch) / 2, (scene.cols - patch) / 2);
    let window = scene.crop(r0, c0, patch, patch)?;
    let out = model.predict(&window, channels)?;
    let off = (patch - crop) / 2;
    let mut m = Vec::with_capacity(crop * crop);
    let mut y = Vec::with_capacity(crop * crop);
    let mut p = Vec::with_capacity(crop * crop);
    for r in off..off + crop {
        for c in off..off + crop {
            let i = r * patch + c;
            m.push(window.m[i]);
            y.push(window.y[i]);
            p.push(out.estimate[i]);
        }
    }
    accumulate(&m, &y, &p, thresholds)
}

/// Trains and scores every requested variant; rows follow the order of
/// `specs`. `log` receives one line per training run.
pub fn run_ablation(
    specs: &[AblationSpec],
    s: &AblationSettings,
    exec: Execution,
    log: &mut dyn FnMut(&str),
) -> Result<Vec<AblationRow>> {
    let size = s.synth.grid.rows.min(s.synth.grid.cols);
    let mut keys = Vec::new();
    for spec in specs {
        for v in &spec.variants {
            let k = variant_key(spec.axis, v, s)?;
            if k.patch == 0 || k.patch % (1 << s.train.depth) != 0 || k.patch > size || k.patch < s.eval_crop {
                return Err(Error::Config(format!(
                    "patch size {} must be a multiple of 2^{} between the {} crop and the {size} scene",
                    k.patch, s.train.depth, s.eval_crop
                )));
            }
            keys.push((spec.axis, v.clone(), k));
        }
    }
    let parent = GridSpec::global();
    let channels = s.synth.channel_descriptors();
    let th = s.thresholds.as_vec();
    let scenes = generate_corpus(&s.synth, &parent, s.train_scenes, 0, Target::Swath, exec)?;
    let val: Vec<GriddedPair> = generate_corpus(&s.synth, &parent, s.val_scenes, 1, Target::Dense, exec)?
        .into_iter()
        .map(|r| r.pair)
        .collect();

    let mut pretrained: Option<Checkpoint> = None;
    let mut done: Vec<(VariantKey, [Option<f64>; 4])> = Vec::new();
    let mut rows = Vec::with_capacity(keys.len());
    for (axis, name, key) in keys {
        if let Some((_, csi)) = done.iter().find(|(k, _)| *k == key) {
            rows.push(AblationRow { axis, variant: name, csi: *csi });
            continue;
        }
        let mut cfg = TrainConfig {
            augment: key.augment,
            lds: key.lds,
            channels: if key.longwave_only { vec![LONGWAVE_WINDOW.to_string()] } else { Vec::new() },
            stage: Stage::Scratch,
            ..s.train.clone()
        };
        let init = if key.pretrained {
            if pretrained.is_none() {
                log(&format!("pretraining on {} dense noisy pairs", s.pretrain_pairs));
                let noisy = SynthConfig {
                    grid: parent.sub_window(0, 0, key.patch, key.patch)?,
                    noise_level: s.pretrain_noise,
                    ..s.synth.clone()
                };
                let pairs: Vec<GriddedPair> = generate_corpus(&noisy, &parent, s.pretrain_pairs, 2, Target::DenseNoisy, exec)?
                    .into_iter()
                    .map(|r| r.pair)
                    .collect();
                let pcfg = TrainConfig { stage: Stage::Pretrain, ..cfg.clone() };
                let out = train(&pcfg, &pairs, &channels, None, exec, &mut |_, _| Ok(Control::Continue))?;
                pretrained = Some(out.checkpoint);
            }
            cfg.stage = Stage::Finetune;
            pretrained.as_ref()
        } else {
            None
        };
        let mut tiles = Vec::new();
        for sc in &scenes {
            tiles.extend(tile_patches(sc, key.patch)?.into_iter().map(|t| t.pair));
        }
        log(&format!("{axis}={name}: training on {} patches of {}", tiles.len(), key.patch));
        let out = train(&cfg, &tiles, &channels, init, exec, &mut |_, _| Ok(Control::Continue))?;
        let model = &out.checkpoint.model;
        let tables = exec.map(&val, |v| score_scene(model, v, &channels, key.patch, s.eval_crop, &th));
        let tables: Vec<ContingencyTable> = tables.into_iter().collect::<Result<_>>()?;
        let report = metrics(&merge(&tables)?);
        let mut csi = [None; 4];
        for (slot, (_, sc, _)) in csi.iter_mut().zip(&report.rows) {
            *slot = sc.csi;
        }
        done.push((key, csi));
        rows.push(AblationRow { axis, variant: name, csi });
    }
    Ok(rows)
}

/// `axis,variant,light,medium,heavy,extreme`; undefined scores as `NA`.
pub fn rows_to_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("axis,variant,light,medium,heavy,extreme\n");
    for r in rows {
        let cells: Vec<String> = r
            .csi
            .iter()
            .map(|v| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}")))
            .collect();
        out.push_str(&format!("{},{},{}\n", r.axis, r.variant, cells.join(",")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_axes_match_the_table() {
        assert_eq!(AblationSpec::standard(Axis::PatchSize).variants, ["32", "64", "128"]);
        assert_eq!(AblationSpec::standard(Axis::Channels).variants, ["longwave-only", "all"]);
        for a in Axis::ALL {
            assert_eq!(a.to_string().parse::<Axis>().unwrap(), a);
            for v in AblationSpec::standard(a).variants {
                variant_key(a, &v, &AblationSettings::default()).unwrap();
            }
        }
        assert!(variant_key(Axis::Lds, "maybe", &AblationSettings::default()).is_err());
    }

    #[test]
    fn tiny_patch_size_run_has_three_rows() {
        let s = AblationSettings {
            train_scenes: 3,
            val_scenes: 2,
            train: TrainConfig { steps: 1, batch_size: 1, base_width: 2, ..Default::default() },
            synth: SynthConfig {
                grid: GridSpec::global().sub_window(0, 0, 128, 128).unwrap(),
                channels: 2,
                ..SynthConfig::default()
            },
            ..Default::default()
        };
        let rows = run_ablation(&[AblationSpec::standard(Axis::PatchSize)], &s, Execution::Sequential, &mut |_| {}).unwrap();
        assert_eq!(rows.len(), 3);
        let csv = rows_to_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("axis,variant,light,medium,heavy,extreme\n"));
    }
}
