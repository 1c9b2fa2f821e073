//! The sequential and parallel paths must produce identical results.

use oya::grid::{GridSpec, GriddedPair};
use oya::mosaic::{coverage_mask, merge_global};
use oya::synth::{generate_corpus, SynthConfig, Target};
use oya::training::{train, Control, TrainConfig};
use oya::Execution;

const BOTH: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn pairs(n: usize, stream: u64, target: Target, exec: Execution) -> Vec<GriddedPair> {
    generate_corpus(&SynthConfig::default(), &GridSpec::global(), n, stream, target, exec)
        .unwrap()
        .into_iter()
        .map(|r| r.pair)
        .collect()
}

#[test]
fn corpus_is_identical() {
    let [a, b] = BOTH.map(|e| pairs(12, 4, Target::DenseNoisy, e));
    assert_eq!(a, b);
}

#[test]
fn training_is_identical() {
    let data = pairs(10, 0, Target::Swath, Execution::Sequential);
    let channels = SynthConfig::default().channel_descriptors();
    let cfg = TrainConfig {
        steps: 6,
        batch_size: 4,
        eval_every: 2,
        seed: 3,
        ..TrainConfig::default()
    };
    let [a, b] = BOTH.map(|e| train(&cfg, &data, &channels, None, e, &mut |_, _| Ok(Control::Continue)).unwrap());
    assert_eq!(a.checkpoint, b.checkpoint);
    let la: Vec<(f64, f64)> = a.reports.iter().map(|r| (r.classifier_loss, r.regression_loss)).collect();
    let lb: Vec<(f64, f64)> = b.reports.iter().map(|r| (r.classifier_loss, r.regression_loss)).collect();
    assert_eq!(la, lb);
}

#[test]
fn tiled_prediction_is_identical_and_blockwise() {
    let data = pairs(4, 0, Target::Swath, Execution::Sequential);
    let channels = SynthConfig::default().channel_descriptors();
    let cfg = TrainConfig {
        steps: 3,
        batch_size: 2,
        ..TrainConfig::default()
    };
    let model = train(&cfg, &data, &channels, None, Execution::Sequential, &mut |_, _| Ok(Control::Continue))
        .unwrap()
        .checkpoint
        .model;
    let truth = pairs(2, 1, Target::Dense, Execution::Sequential);
    for p in &truth {
        let [a, b] = BOTH.map(|e| model.predict_tiled(p, &channels, 32, e).unwrap());
        assert_eq!(a, b);
        // Each 32x32 block is predicted on its own.
        let block = model.predict(&p.crop(32, 0, 32, 32).unwrap(), &channels).unwrap();
        for r in 0..32 {
            assert_eq!(&a.estimate[(32 + r) * p.cols..(32 + r) * p.cols + 32], &block.estimate[r * 32..r * 32 + 32]);
        }
    }
}

#[test]
fn mosaic_is_identical() {
    let g = GridSpec::new(-60.0, 60.0, -180.0, 180.0, 1.0).unwrap();
    let masks: Vec<Vec<Vec<bool>>> = BOTH
        .iter()
        .map(|&e| [-75.0, 0.0, 140.0].iter().map(|&l| coverage_mask(l, 65.0, &g, e).unwrap()).collect())
        .collect();
    assert_eq!(masks[0], masks[1]);
    let rates: Vec<Vec<f32>> = (0..3)
        .map(|k| (0..g.cells()).map(|i| ((i * 7 + k * 13) % 29) as f32 / 3.0).collect())
        .collect();
    let inputs: Vec<(&[f32], &[bool])> = rates.iter().zip(&masks[0]).map(|(r, m)| (r.as_slice(), m.as_slice())).collect();
    let [a, b] = BOTH.map(|e| merge_global(&inputs, &g, e).unwrap());
    assert_eq!(a.contributor_count, b.contributor_count);
    assert!(a.rates.iter().zip(&b.rates).all(|(x, y)| x.to_bits() == y.to_bits()));
}
