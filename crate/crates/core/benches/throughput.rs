//! Sequential versus rayon-parallel execution of the data-parallel stages.
//! Build with `--no-default-features` to see the parallel path fall back to
//! sequential.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use oya::grid::{GridSpec, GriddedPair};
use oya::model::{CombineMode, InputSpec, ModelParams, Network, TwoStageModel, UNetConfig};
use oya::mosaic::{coverage_mask, merge_global};
use oya::synth::{generate_corpus, SynthConfig, Target};
use oya::training::{train, Control, TrainConfig};
use oya::Execution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn corpus(n: usize, target: Target) -> (SynthConfig, Vec<GriddedPair>) {
    let base = SynthConfig::default();
    let pairs = generate_corpus(&base, &GridSpec::global(), n, 0, target, Execution::Parallel)
        .expect("synthetic corpus")
        .into_iter()
        .map(|r| r.pair)
        .collect();
    (base, pairs)
}

fn model(base: &SynthConfig) -> TwoStageModel {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = base.channels;
    let (c, r) = (
        UNetConfig::classifier(n).with_size(TrainConfig::DEFAULT_DEPTH, TrainConfig::DEFAULT_BASE_WIDTH),
        UNetConfig::regressor(n).with_size(TrainConfig::DEFAULT_DEPTH, TrainConfig::DEFAULT_BASE_WIDTH),
    );
    TwoStageModel::new(
        Network::new(c, ModelParams::init(&c, &mut rng).unwrap()).unwrap(),
        Network::new(r, ModelParams::init(&r, &mut rng).unwrap()).unwrap(),
        InputSpec {
            channels: base.channel_descriptors().into_iter().map(|d| d.name).collect(),
            mean: vec![0.0; n],
            std: vec![1.0; n],
        },
        CombineMode::default(),
    )
    .unwrap()
}

fn training_steps(c: &mut Criterion) {
    let (base, pairs) = corpus(32, Target::Swath);
    let channels = base.channel_descriptors();
    let cfg = TrainConfig {
        steps: 5,
        ..TrainConfig::default()
    };
    let mut g = c.benchmark_group("train_5_steps_batch_8");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| train(&cfg, &pairs, &channels, None, exec, &mut |_, _| Ok(Control::Continue)).unwrap())
        });
    }
    g.finish();
}

fn batch_predict(c: &mut Criterion) {
    let (base, pairs) = corpus(16, Target::Dense);
    let channels = base.channel_descriptors();
    let m = model(&base);
    let mut g = c.benchmark_group("predict_16_pairs");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exec.map(&pairs, |p| m.predict(p, &channels).unwrap()))
        });
    }
    g.finish();
}

fn synthesis(c: &mut Criterion) {
    let base = SynthConfig::default();
    let parent = GridSpec::global();
    let mut g = c.benchmark_group("synth_16_pairs");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| generate_corpus(&base, &parent, 16, 0, Target::Swath, exec).unwrap())
        });
    }
    g.finish();
}

fn mosaic(c: &mut Criterion) {
    let g = GridSpec::new(-60.0, 60.0, -180.0, 180.0, 0.25).unwrap();
    let lons = [-137.2, -75.2, 0.0, 45.5, 140.7];
    let rates = vec![1.0f32; g.cells()];
    let masks: Vec<Vec<bool>> = lons
        .iter()
        .map(|&l| coverage_mask(l, 70.0, &g, Execution::Parallel).unwrap())
        .collect();
    let inputs: Vec<(&[f32], &[bool])> = masks.iter().map(|m| (rates.as_slice(), m.as_slice())).collect();
    let mut group = c.benchmark_group("mosaic_quarter_degree");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("coverage", name), |b| {
            b.iter(|| coverage_mask(0.0, 70.0, &g, exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("merge_5", name), |b| {
            b.iter(|| merge_global(&inputs, &g, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, training_steps, batch_predict, synthesis, mosaic);
criterion_main!(benches);
