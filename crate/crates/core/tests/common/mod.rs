#![allow(dead_code)]

use std::path::Path;

use emofuse::dataset::{
    balance_and_split, build_manifest, generate_synthetic_fixture, ClassMode, FixtureConfig, Manifest, Modality,
};
use emofuse::models::{ModelConfig, Variant};
use emofuse::signal::SegmentSpec;
use emofuse::training::TrainConfig;

/// Writes a synthetic dataset and returns a balanced, split manifest with
/// `train` and `val` examples per class.
pub fn fixture(root: &Path, classes: ClassMode, train: usize, val: usize, video: bool, seed: u64) -> Manifest {
    let utterances = train + val;
    let cfg = FixtureConfig {
        classes,
        utterances_per_class: utterances,
        video,
        seed,
        jobs: 4,
        ..FixtureConfig::default()
    };
    generate_synthetic_fixture(root, &cfg).unwrap();
    let modality = if video { Modality::AudioVideo } else { Modality::Audio };
    let m = build_manifest(root, SegmentSpec::Ds2, modality).unwrap();
    balance_and_split(&m, utterances, train as f64 / utterances as f64, seed).unwrap()
}

/// Narrow networks that still take full-size inputs.
pub fn small_model(variant: Variant, k: usize) -> ModelConfig {
    ModelConfig {
        conv_channels: [4, 4, 8],
        fc_hidden: 16,
        rnn_hidden: 8,
        embedding_dim: 8,
        video_channels: [2, 2, 4, 4],
        video_fc_hidden: 8,
        ..ModelConfig::new(variant, k)
    }
}

pub fn quick_train(k: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        batch_size: 2,
        epochs: 2,
        eval_every: 2,
        class_mode: ClassMode::from_count(k).unwrap(),
        ..TrainConfig::default()
    }
}
pub mod grad;
