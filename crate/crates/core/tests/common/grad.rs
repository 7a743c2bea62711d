//! Gradient-check cases shared by the gradient tests and the acceptance run.

use std::collections::BTreeMap;

use emofuse::models::{AudioNet, Input, ModelConfig, OutputMode, TwoStream, Variant, VideoNet};
use emofuse::rng::{stream, Purpose};
use emofuse::tensor::{Scalar, Tensor};
use emofuse::training::{check_gradients_against, Embeddings, GradCheckConfig, GradReport, Objective, Target};
use rand_distr::{Distribution, StandardNormal};

/// Narrow layers and small inputs so finite differences stay cheap.
pub fn small_config(variant: Variant) -> ModelConfig {
    ModelConfig {
        conv_channels: [3, 4, 5],
        fc_hidden: 12,
        rnn_hidden: 6,
        embedding_dim: 6,
        video_channels: [2, 3, 3, 4],
        video_fc_hidden: 8,
        audio_input: [24, 32],
        video_input: [8, 16, 16],
        ..ModelConfig::new(variant, 4)
    }
}

pub fn randn<T: Scalar>(shape: &[usize], seed: u64) -> Tensor<T> {
    let mut rng = stream(seed, Purpose::GradCheck, 99);
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::of(StandardNormal.sample(&mut rng))).collect();
    Tensor::from_vec(shape, data).unwrap()
}

pub fn inputs<T: Scalar>(cfg: &ModelConfig, n: usize) -> Vec<Input<T>> {
    let [h, w] = cfg.audio_input;
    let [t, vh, vw] = cfg.video_input;
    (0..n)
        .map(|i| Input {
            spec: randn(&[3, h, w], i as u64),
            clip: Some(randn(&[3, t, vh, vw], 100 + i as u64)),
        })
        .collect()
}

pub fn classes(n: usize) -> Vec<Target> {
    (0..n).map(|i| Target::Class(i % 4)).collect()
}

pub fn tolerance<T: Scalar>() -> f64 {
    if T::DTYPE == "f32" { 1e-2 } else { 1e-4 }
}

/// Entries checked per layer, weight and bias together.
pub fn per_layer_counts(r: &GradReport) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for p in &r.params {
        let layer = p.name.rsplit_once('.').map_or(p.name.as_str(), |(l, _)| l);
        *out.entry(layer.to_string()).or_default() += p.checked;
    }
    out
}

pub fn layers_sampled(r: &GradReport) -> bool {
    per_layer_counts(r).values().all(|&n| n >= 10)
}

pub fn audio_report<T: Scalar>(variant: Variant) -> GradReport {
    let cfg = small_config(variant);
    let mut net = AudioNet::<T>::new(&cfg, OutputMode::Logits, 3);
    let mut twin = AudioNet::<f64>::new(&cfg, OutputMode::Logits, 3);
    let gc = GradCheckConfig::for_dtype::<T>();
    check_gradients_against(&mut net, &mut twin, Objective::CrossEntropy, &inputs::<T>(&cfg, 2), &classes(2), &gc)
        .unwrap()
}

pub fn video_report<T: Scalar>() -> GradReport {
    let cfg = small_config(Variant::TwoStream);
    let mut net = VideoNet::<T>::new(&cfg, 5);
    let mut twin = VideoNet::<f64>::new(&cfg, 5);
    let gc = GradCheckConfig::for_dtype::<T>();
    check_gradients_against(&mut net, &mut twin, Objective::CrossEntropy, &inputs::<T>(&cfg, 2), &classes(2), &gc)
        .unwrap()
}

/// Cross-entropy through the classifier, then the contrastive loss on the
/// embeddings of one matched and one mismatched pair.
pub fn two_stream_reports<T: Scalar>() -> (GradReport, GradReport) {
    let cfg = small_config(Variant::TwoStream);
    let x = inputs::<T>(&cfg, 2);
    let gc = GradCheckConfig::for_dtype::<T>();
    let mut net = TwoStream::<T>::new(&cfg, 7);
    let mut twin = TwoStream::<f64>::new(&cfg, 7);
    let ce = check_gradients_against(&mut net, &mut twin, Objective::CrossEntropy, &x, &classes(2), &gc).unwrap();
    // margin large enough that the mismatched pair sits inside it
    let targets = [Target::Matched(true), Target::Matched(false)];
    let obj = Objective::Contrastive { margin: 4.0 };
    let con = check_gradients_against(&mut Embeddings(&mut net), &mut Embeddings(&mut twin), obj, &x, &targets, &gc)
        .unwrap();
    (ce, con)
}
