//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use chrono::Duration;
use clap::Args;
use oya::ablation::{rows_to_csv, run_ablation, AblationSpec, Axis};
use oya::dataset::{class_histogram, split_by_period, IntensityThresholds};
use oya::eval::{accumulate, case_report as write_case_report, csi_color, merge, metrics, write_ppm, CaseProduct, CsiMapAccumulator};
use oya::grid::store::{write_raster, PatchStore};
use oya::grid::{tile_patches, GriddedPair, PatchRecord};
use oya::kv::write_file;
use oya::model::Checkpoint;
use oya::mosaic::{merge_global, Contributor, SatelliteCoverage};
use oya::synth::{generate_corpus, generate_pair, SynthConfig};
use oya::training::{append_loss_log, train as run_training, Control, Stage};
use oya::{Execution, RAIN_THRESHOLD};

use crate::{settings, Common};

fn require(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        bail!("{what} not found: {}", path.display());
    }
    Ok(())
}

fn read_store(path: &Path) -> Result<PatchStore> {
    require(path, "patch store")?;
    PatchStore::read(path).with_context(|| format!("reading patch store {}", path.display()))
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    require(path, "checkpoint")?;
    Checkpoint::load(path).with_context(|| format!("reading checkpoint {}", path.display()))
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn exec() -> Execution {
    Execution::from_env()
}

#[derive(Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of records to generate.
    #[arg(long)]
    pub count: Option<usize>,
    /// Target kind: swath, dense or noisy.
    #[arg(long)]
    pub target: Option<String>,
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let s = settings::synth(&a.common, a.count, a.target.as_deref())?;
    let mut store = PatchStore::new(s.parent, s.cfg.channel_descriptors(), s.split);
    store.records = generate_corpus(&s.cfg, &s.parent, s.count, s.stream, s.target, exec())?;
    create_out(&a.common.out)?;
    store.write(&a.common.out)?;
    eprintln!("wrote {} records to {}", store.records.len(), a.common.out.display());
    Ok(())
}

#[derive(Args)]
pub struct BuildDatasetArgs {
    #[command(flatten)]
    pub common: Common,
    /// Scene store; repeat to combine stores on the same grid and channels.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    /// Patch edge length in cells.
    #[arg(long)]
    pub patch: Option<usize>,
}

pub fn build_dataset(a: BuildDatasetArgs) -> Result<()> {
    let s = settings::dataset(&a.common, a.patch)?;
    let thresholds = intensity_thresholds(&a.common)?;
    let mut first: Option<PatchStore> = None;
    let mut patches = Vec::new();
    for path in &a.input {
        let store = read_store(path)?;
        if let Some(f) = &first {
            ensure!(
                f.grid == store.grid && f.channels == store.channels,
                "{} uses a different grid or channel set than {}",
                path.display(),
                a.input[0].display()
            );
        }
        for r in &store.records {
            patches.extend(tile_patches(r, s.patch)?);
        }
        first.get_or_insert(store);
    }
    let base = first.expect("at least one input");
    let (train, validation) = split_by_period(patches, &s.train_years, &s.validation_years)?;
    create_out(&a.common.out)?;
    for (name, records) in [("train", train), ("validation", validation)] {
        let hist = class_histogram(&records, &thresholds)?;
        let mut store = PatchStore::new(base.grid, base.channels.clone(), name);
        store.records = records;
        store.write(&a.common.out.join(name))?;
        write_file(&a.common.out.join(format!("{name}_histogram.txt")), hist.to_table().as_bytes())?;
        eprintln!("{name}: {} patches", store.records.len());
    }
    Ok(())
}

fn intensity_thresholds(common: &Common) -> Result<IntensityThresholds> {
    let t = settings::thresholds(common.thresholds.as_deref())?;
    ensure!(t.len() == 4, "intensity classes need exactly 4 thresholds, got {}", t.len());
    Ok(IntensityThresholds::new(t[0], t[1], t[2], t[3])?)
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Training patch store.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint to start from.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Optimizer steps for this run.
    #[arg(long)]
    pub steps: Option<u64>,
    /// pretrain, finetune or scratch.
    #[arg(long)]
    pub stage: Option<String>,
    /// Loss log CSV to append to (default: a fresh <out>/loss_log.csv).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = settings::train(&a.common)?;
    if let Some(n) = a.steps {
        cfg.steps = n;
    }
    if let Some(s) = &a.stage {
        cfg.stage = s.parse::<Stage>()?;
    }
    cfg.validate()?;
    let store = read_store(&a.data)?;
    let init = a.init.as_deref().map(read_checkpoint).transpose()?;
    let pairs: Vec<GriddedPair> = store.records.into_iter().map(|r| r.pair).collect();
    let outcome = run_training(&cfg, &pairs, &store.channels, init.as_ref(), exec(), &mut |_, _| Ok(Control::Continue))?;
    create_out(&a.common.out)?;
    outcome.checkpoint.save(&a.common.out)?;
    // The default log belongs to this run and is rewritten; an explicit
    // `--log` is appended to so one file can follow a whole lineage.
    let log = match a.log {
        Some(path) => path,
        None => {
            let path = a.common.out.join("loss_log.csv");
            if path.exists() {
                std::fs::remove_file(&path).with_context(|| format!("replacing {}", path.display()))?;
            }
            path
        }
    };
    append_loss_log(&log, &outcome.reports)?;
    eprintln!(
        "trained {} steps; checkpoint at {}",
        outcome.steps_run,
        a.common.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Truth patch store.
    #[arg(long)]
    pub truth: PathBuf,
    /// Prediction store aligned record by record with the truth store.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub pred: Option<PathBuf>,
    /// Checkpoint to run over the truth store instead of `--pred`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Also write a per-cell CSI map at this rate threshold.
    #[arg(long)]
    pub csi_map: Option<f64>,
}

/// Predicted rates for every truth record, from a store or a checkpoint.
fn predictions(truth: &PatchStore, pred: Option<&Path>, model: Option<&Path>) -> Result<Vec<Vec<f32>>> {
    if let Some(p) = pred {
        let store = read_store(p)?;
        ensure!(
            store.records.len() == truth.records.len(),
            "prediction store has {} records, truth has {}",
            store.records.len(),
            truth.records.len()
        );
        return store
            .records
            .into_iter()
            .zip(&truth.records)
            .enumerate()
            .map(|(i, (p, t))| {
                ensure!(
                    (p.pair.rows, p.pair.cols, p.origin) == (t.pair.rows, t.pair.cols, t.origin),
                    "prediction record {i} does not line up with the truth record"
                );
                Ok(p.pair.y)
            })
            .collect();
    }
    let ckpt = read_checkpoint(model.expect("clap requires --pred or --model"))?;
    exec()
        .map(&truth.records, |r| ckpt.model.predict(&r.pair, &truth.channels).map(|o| o.estimate))
        .into_iter()
        .map(|r| r.map_err(Into::into))
        .collect()
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let thresholds = settings::thresholds(a.common.thresholds.as_deref())?;
    let truth = read_store(&a.truth)?;
    let preds = predictions(&truth, a.pred.as_deref(), a.model.as_deref())?;
    let tables = truth
        .records
        .iter()
        .zip(&preds)
        .map(|(r, p)| accumulate(&r.pair.m, &r.pair.y, p, &thresholds))
        .collect::<oya::Result<Vec<_>>>()?;
    ensure!(!tables.is_empty(), "truth store {} has no records", a.truth.display());
    let report = metrics(&merge(&tables)?);
    create_out(&a.common.out)?;
    write_file(&a.common.out.join("metrics.csv"), report.to_csv().as_bytes())?;
    if let Some(t) = a.csi_map {
        let g = &truth.grid;
        let mut acc = CsiMapAccumulator::new(*g, t);
        for (r, p) in truth.records.iter().zip(&preds) {
            let window = g.sub_window(r.origin.0, r.origin.1, r.pair.rows, r.pair.cols)?;
            acc.add(&window, &r.pair.m, &r.pair.y, p)?;
        }
        let map = acc.finish();
        write_raster(&a.common.out.join("csi_map.bin"), g.rows, g.cols, &map)?;
        write_ppm(&a.common.out.join("csi_map.ppm"), g.rows, g.cols, &map, csi_color)?;
    }
    print!("{}", report.to_csv());
    Ok(())
}

#[derive(Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub common: Common,
    /// Checkpoint directory.
    #[arg(long)]
    pub model: PathBuf,
    /// Input patch store.
    #[arg(long)]
    pub input: PathBuf,
}

pub fn infer(a: InferArgs) -> Result<()> {
    let ckpt = read_checkpoint(&a.model)?;
    let input = read_store(&a.input)?;
    let outputs = exec().map(&input.records, |r| ckpt.model.predict(&r.pair, &input.channels));
    let mut store = PatchStore::new(input.grid, input.channels.clone(), "prediction");
    for (r, o) in input.records.iter().zip(outputs) {
        let o = o?;
        let p = &r.pair;
        store.records.push(PatchRecord {
            pair: GriddedPair::new(p.rows, p.cols, p.channels, p.x.clone(), o.estimate, vec![true; p.cells()])?,
            ..r.clone()
        });
    }
    create_out(&a.common.out)?;
    store.write(&a.common.out)?;
    eprintln!("wrote {} predictions to {}", store.records.len(), a.common.out.display());
    Ok(())
}

#[derive(Args)]
pub struct MosaicArgs {
    #[command(flatten)]
    pub common: Common,
    /// Checkpoint directory.
    #[arg(long)]
    pub model: PathBuf,
}

/// One synthetic full-grid scene per time step is shared by every
/// satellite; each satellite contributes the model estimate over its own
/// coverage disk.
pub fn mosaic(a: MosaicArgs) -> Result<()> {
    let ckpt = read_checkpoint(&a.model)?;
    let s = settings::mosaic(&a.common)?;
    let g = settings::grid(&a.common)?;
    let ex = exec();
    let coverage = s
        .satellites
        .iter()
        .map(|sat| SatelliteCoverage::new(sat.id.clone(), sat.sub_longitude, sat.max_view_radius, &g, ex))
        .collect::<oya::Result<Vec<_>>>()?;
    create_out(&a.common.out)?;
    for step in 0..s.time_steps {
        let time = s.start_time + Duration::minutes(s.interval_minutes * step as i64);
        let cfg = SynthConfig {
            seed: s.synth.seed.wrapping_add(step as u64),
            grid: g,
            start_time: time,
            ..s.synth.clone()
        };
        let scene = generate_pair(&cfg)?;
        let truth: Vec<f32> = scene.dense_truth.iter().map(|&v| v as f32).collect();
        let pair = GriddedPair::new(g.rows, g.cols, cfg.channels, scene.scene.data, truth.clone(), vec![true; g.cells()])?;
        let est = ckpt.model.predict_tiled(&pair, &cfg.channel_descriptors(), s.tile, ex)?;
        let inputs: Vec<(&[f32], &[bool])> = coverage
            .iter()
            .map(|c| (est.estimate.as_slice(), c.coverage.as_slice()))
            .collect();
        let product = merge_global(&inputs, &g, ex)?;
        let contributors: Vec<Contributor> = s
            .satellites
            .iter()
            .map(|sat| Contributor {
                satellite_id: sat.id.clone(),
                sub_longitude: sat.sub_longitude,
                max_view_radius: sat.max_view_radius,
                scan_start: time,
            })
            .collect();
        let dir = a.common.out.join(format!("step_{step:04}"));
        create_out(&dir)?;
        product.write(&dir, &g, time, &contributors)?;
        write_raster(&dir.join("truth.bin"), g.rows, g.cols, &truth)?;
        eprintln!("step {step}: {}", dir.display());
    }
    Ok(())
}

#[derive(Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Axes to run: channels, augmentation, pretraining, patch_size, lds.
    /// All of them when omitted.
    pub axes: Vec<String>,
    /// Optimizer steps per variant.
    #[arg(long)]
    pub steps: Option<u64>,
}

pub fn ablate(a: AblateArgs) -> Result<()> {
    let mut s = settings::ablation(&a.common, a.steps)?;
    s.thresholds = intensity_thresholds(&a.common)?;
    let axes: Vec<Axis> = if a.axes.is_empty() {
        Axis::ALL.to_vec()
    } else {
        a.axes.iter().map(|x| x.parse()).collect::<oya::Result<_>>()?
    };
    let specs: Vec<AblationSpec> = axes.into_iter().map(AblationSpec::standard).collect();
    let rows = run_ablation(&specs, &s, exec(), &mut |line| eprintln!("{line}"))?;
    create_out(&a.common.out)?;
    let csv = rows_to_csv(&rows);
    write_file(&a.common.out.join("ablation.csv"), csv.as_bytes())?;
    print!("{csv}");
    Ok(())
}

#[derive(Args)]
pub struct CaseReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Checkpoint whose estimate is reported as `model`.
    #[arg(long)]
    pub model: PathBuf,
    /// Truth patch store.
    #[arg(long)]
    pub truth: PathBuf,
    /// Record index within the truth store.
    #[arg(long, default_value_t = 0)]
    pub record: usize,
    /// Extra product as NAME=STORE, aligned with the truth store.
    #[arg(long)]
    pub pred: Vec<String>,
}

pub fn case_report(a: CaseReportArgs) -> Result<()> {
    let thresholds = settings::thresholds(a.common.thresholds.as_deref())?;
    let truth = read_store(&a.truth)?;
    let rec = truth.records.get(a.record).with_context(|| {
        format!("record {} is out of range; {} has {} records", a.record, a.truth.display(), truth.records.len())
    })?;
    let ckpt = read_checkpoint(&a.model)?;
    let mut products = vec![CaseProduct {
        name: "model".into(),
        rates: ckpt.model.predict(&rec.pair, &truth.channels)?.estimate,
    }];
    for spec in &a.pred {
        let (name, path) = spec
            .split_once('=')
            .with_context(|| format!("--pred must be NAME=STORE, got `{spec}`"))?;
        let store = read_store(Path::new(path))?;
        let r = store
            .records
            .get(a.record)
            .with_context(|| format!("{path} has no record {}", a.record))?;
        ensure!(r.origin == rec.origin, "{path} record {} does not line up with the truth record", a.record);
        products.push(CaseProduct {
            name: name.to_string(),
            rates: r.pair.y.clone(),
        });
    }
    create_out(&a.common.out)?;
    for (name, report) in write_case_report(&a.common.out, &rec.pair, &products, &thresholds)? {
        let csi = report.csi_at(RAIN_THRESHOLD).map_or("NA".to_string(), |v| format!("{v:.4}"));
        println!("{name}: CSI at {RAIN_THRESHOLD} mm/h = {csi}");
    }
    Ok(())
}
