use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{log_transform, AugmentOp, LdsTable};
use crate::grid::{ChannelDescriptor, GriddedPair};
use crate::model::{Checkpoint, InputSpec, ModelParams, Network, StageTag, TwoStageModel, UNetConfig};
use crate::{Error, Execution, Result, RAIN_THRESHOLD};

use super::config::{ClassWeights, Stage, TrainConfig};
use super::examples::{build_examples, example_gradients};
use super::optim::{optimizer_step, AdamState};

/// Per-step training losses, each normalized by its contributing cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub step: u64,
    pub classifier_loss: f64,
    pub regression_loss: f64,
    pub examples_seen: u64,
}

/// Observer verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub reports: Vec<LossReport>,
    pub class_weights: [f64; 2],
    /// Fitted on the training split when LDS is enabled.
    pub lds: Option<LdsTable>,
    /// Steps actually run (fewer than configured if the observer stopped).
    pub steps_run: u64,
}

/// Inverse class frequency over valid cells, rescaled to mean 1. Falls back
/// to equal weights when a class is absent.
pub fn inverse_frequency_weights(pairs: &[GriddedPair]) -> [f64; 2] {
    let (mut n0, mut n1) = (0u64, 0u64);
    for p in pairs {
        for (&m, &y) in p.m.iter().zip(&p.y) {
            if m {
                if y as f64 >= RAIN_THRESHOLD {
                    n1 += 1;
                } else {
                    n0 += 1;
                }
            }
        }
    }
    if n0 == 0 || n1 == 0 {
        return [1.0, 1.0];
    }
    let (w0, w1) = (1.0 / n0 as f64, 1.0 / n1 as f64);
    let mean = (w0 + w1) / 2.0;
    [w0 / mean, w1 / mean]
}

fn channel_stats(pairs: &[GriddedPair], idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut mean = Vec::with_capacity(idx.len());
    let mut std = Vec::with_capacity(idx.len());
    for &c in idx {
        let (mut n, mut s, mut ss) = (0u64, 0.0f64, 0.0f64);
        for p in pairs {
            for &v in p.plane(c) {
                if v.is_finite() {
                    n += 1;
                    s += v as f64;
                }
            }
        }
        let mu = if n > 0 { s / n as f64 } else { 0.0 };
        for p in pairs {
            for &v in p.plane(c) {
                if v.is_finite() {
                    ss += (v as f64 - mu).powi(2);
                }
            }
        }
        let sd = if n > 0 { (ss / n as f64).sqrt() } else { 0.0 };
        mean.push(mu);
        std.push(if sd > 1e-12 { sd } else { 1.0 });
    }
    (mean, std)
}

fn stage_tag(stage: Stage) -> StageTag {
    match stage {
        Stage::Pretrain => StageTag::Pretrained,
        Stage::Finetune => StageTag::Finetuned,
        Stage::Scratch => StageTag::Scratch,
    }
}

fn initial_model(
    cfg: &TrainConfig,
    pairs: &[GriddedPair],
    channels: &[ChannelDescriptor],
    init: Option<&Checkpoint>,
    rng: &mut ChaCha8Rng,
) -> Result<TwoStageModel> {
    let names: Vec<String> = if cfg.channels.is_empty() {
        channels.iter().map(|c| c.name.clone()).collect()
    } else {
        cfg.channels.clone()
    };
    let cc = UNetConfig::classifier(names.len()).with_size(cfg.depth, cfg.base_width);
    let rc = UNetConfig::regressor(names.len()).with_size(cfg.depth, cfg.base_width);
    cc.validate()?;
    match init {
        Some(ck) => {
            if cfg.stage == Stage::Finetune && ck.stage != StageTag::Pretrained {
                return Err(Error::Config(format!("fine-tuning needs a pretrained checkpoint, got `{}`", ck.stage)));
            }
            let m = &ck.model;
            if m.input.channels != names || m.classifier.config != cc || m.regressor.config != rc {
                return Err(Error::Config(format!(
                    "checkpoint (channels {:?}, {:?}) does not match the training config (channels {:?}, {:?})",
                    m.input.channels, m.classifier.config, names, cc
                )));
            }
            m.input.resolve(channels)?;
            let mut model = m.clone();
            model.combine = cfg.combine_mode();
            Ok(model)
        }
        None => {
            if cfg.stage == Stage::Finetune {
                return Err(Error::Config("fine-tuning needs an initial checkpoint".into()));
            }
            let probe = InputSpec {
                channels: names,
                mean: Vec::new(),
                std: Vec::new(),
            };
            let idx = probe.resolve(channels)?;
            let (mean, std) = channel_stats(pairs, &idx);
            let input = InputSpec { mean, std, ..probe };
            let classifier = Network::new(cc, ModelParams::init(&cc, rng)?)?;
            let regressor = Network::new(rc, ModelParams::init(&rc, rng)?)?;
            TwoStageModel::new(classifier, regressor, input, cfg.combine_mode())
        }
    }
}

/// Trains both networks on `pairs` (sparse targets for scratch and
/// fine-tune, dense targets for pretraining). The networks share no
/// parameters and are optimized independently on their own losses.
///
/// All randomness (initialization, batch sampling, augmentation) comes from
/// `cfg.seed`, so identical inputs give identical trajectories under either
/// execution policy. `observer` is called with the current model at step 0
/// and every `cfg.eval_every` steps and may stop training early.
pub fn train(
    cfg: &TrainConfig,
    pairs: &[GriddedPair],
    channels: &[ChannelDescriptor],
    init: Option<&Checkpoint>,
    exec: Execution,
    observer: &mut dyn FnMut(u64, &TwoStageModel) -> Result<Control>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::Invalid("training needs at least one example".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = initial_model(cfg, pairs, channels, init, &mut rng)?;
    let class_weights = match cfg.class_weights {
        ClassWeights::Fixed(w) => w,
        ClassWeights::Auto => inverse_frequency_weights(pairs),
    };
    let lds = if cfg.lds {
        let mut z = Vec::new();
        for p in pairs {
            for (&m, &y) in p.m.iter().zip(&p.y) {
                if m && y as f64 >= RAIN_THRESHOLD {
                    z.push(log_transform(y as f64)?);
                }
            }
        }
        if z.is_empty() {
            None
        } else {
            Some(LdsTable::fit(&z, &cfg.lds_config())?)
        }
    } else {
        None
    };
    let examples = build_examples(pairs, channels, &model, lds.as_ref(), exec)?;
    let ops: &[AugmentOp] = match (cfg.augment, examples.iter().all(|e| e.x.h == e.x.w)) {
        (false, _) => &[AugmentOp::Identity],
        (true, true) => &AugmentOp::ALL,
        (true, false) => &[AugmentOp::Identity, AugmentOp::HFlip, AugmentOp::VFlip, AugmentOp::Rot180],
    };

    let adam = cfg.adam();
    let mut cstate = AdamState::new(model.classifier.params.len());
    let mut rstate = AdamState::new(model.regressor.params.len());
    let mut reports = Vec::with_capacity(cfg.steps as usize);
    let mut steps_run = 0;
    if observer(0, &model)? == Control::Continue {
        for step in 1..=cfg.steps {
            let batch: Vec<(usize, AugmentOp)> = (0..cfg.batch_size)
                .map(|_| {
                    let i = rng.random_range(0..examples.len());
                    let op = ops[rng.random_range(0..ops.len())];
                    (i, op)
                })
                .collect();
            let (c, r) = (&model.classifier, &model.regressor);
            let per_example = exec.map(&batch, |&(i, op)| {
                example_gradients(
                    (&c.params, &c.config),
                    (&r.params, &r.config),
                    &examples[i].augmented(op),
                    class_weights,
                )
            });
            let mut gc = vec![0.0f32; c.params.len()];
            let mut gr = vec![0.0f32; r.params.len()];
            let (mut ce, mut reg, mut nv, mut nr) = (0.0, 0.0, 0usize, 0usize);
            for g in per_example {
                let g = g?;
                gc.iter_mut().zip(&g.classifier).for_each(|(a, b)| *a += b);
                gr.iter_mut().zip(&g.regressor).for_each(|(a, b)| *a += b);
                ce += g.ce;
                reg += g.reg;
                nv += g.valid;
                nr += g.rain;
            }
            let (sv, sr) = (1.0 / nv.max(1) as f32, 1.0 / nr.max(1) as f32);
            gc.iter_mut().for_each(|v| *v *= sv);
            gr.iter_mut().for_each(|v| *v *= sr);
            optimizer_step(model.classifier.params.values_mut(), &gc, &mut cstate, &adam)?;
            optimizer_step(model.regressor.params.values_mut(), &gr, &mut rstate, &adam)?;
            steps_run = step;
            reports.push(LossReport {
                step,
                classifier_loss: ce / nv.max(1) as f64,
                regression_loss: reg / nr.max(1) as f64,
                examples_seen: step * cfg.batch_size as u64,
            });
            if step % cfg.eval_every == 0 && observer(step, &model)? == Control::Stop {
                break;
            }
        }
    }

    let tag = stage_tag(cfg.stage);
    let (lineage, seed, prior) = match init {
        Some(ck) => {
            let lineage = if ck.stage == tag {
                ck.lineage.clone()
            } else {
                format!("{}>{tag}", ck.lineage)
            };
            let seed = if steps_run == 0 { ck.seed } else { cfg.seed };
            (lineage, seed, ck.steps)
        }
        None => (tag.to_string(), cfg.seed, 0),
    };
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            stage: tag,
            model,
            seed,
            steps: prior + steps_run,
            lineage,
        },
        reports,
        class_weights,
        lds,
        steps_run,
    })
}

/// Appends reports to a CSV log, writing the header when the file is new.
pub fn append_loss_log(path: &Path, reports: &[LossReport]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let fresh = !path.exists();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut out = String::new();
    if fresh {
        out.push_str("step,classifier_loss,regression_loss,examples_seen\n");
    }
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.step, r.classifier_loss, r.regression_loss, r.examples_seen
        ));
    }
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
