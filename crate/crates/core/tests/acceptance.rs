//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test -p emofuse --test acceptance -- [name ...]` runs a subset; names
//! are `losses`, `gradients`, `shapes`, `counts`, `sampler`, `overfit`,
//! `separability`, `determinism` and `evaluation`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::grad::{audio_report, layers_sampled, tolerance, two_stream_reports, video_report};
use emofuse::dataset::{
    augment, balance_and_split, build_manifest, generate_synthetic_fixture, sample_contrastive_pairs, Augmentation,
    ClassMode, Emotion, Example, FixtureConfig, Manifest, Modality, PairRatios, PairType, PreprocessConfig, Split,
};
use emofuse::evaluation::evaluate;
use emofuse::losses::{contrastive, contrastive_row, cross_entropy, cross_entropy_row, ContrastiveConfig};
use emofuse::models::{AudioNet, Checkpoint, ModelConfig, Network, OutputMode, TwoStream, Variant, VideoNet};
use emofuse::nn::Parameterized;
use emofuse::npy;
use emofuse::rng::{stream, Purpose};
use emofuse::signal::SegmentSpec;
use emofuse::tensor::{Scalar, Tensor};
use emofuse::training::{
    pair_distances, pretrain, train_supervised, Control, GradReport, HistoryRecord, TrainConfig, TrainOptions,
    TrainOutcome, HISTORY_FILE,
};
use rand::Rng as _;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("emofuse-acceptance-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

// ---------------------------------------------------------------- losses

/// Log-softmax through an explicit sum of exponentials, no max shift.
fn ce_oracle(logits: &[f64], label: usize) -> f64 {
    let z: f64 = logits.iter().map(|v| v.exp()).sum();
    -(logits[label].exp() / z).ln()
}

fn contrastive_oracle(v: &[f64], a: &[f64], y: bool, margin: f64) -> f64 {
    let d = v.iter().zip(a).fold(0.0f64, |acc, (x, z)| acc.hypot(x - z));
    if y {
        d * d
    } else {
        (margin - d).max(0.0).powi(2)
    }
}

fn losses() -> Verdict {
    let started = Instant::now();
    let mut rng = stream(1, Purpose::Fixture, 500);
    let mut worst_ce: f64 = 0.0;
    for case in 0..100 {
        let k = if case % 2 == 0 { 4 } else { 3 };
        let logits: Vec<f64> = (0..k).map(|_| rng.random_range(-8.0..8.0)).collect();
        let label = rng.random_range(0..k);
        let (row, _) = cross_entropy_row(&logits, label).unwrap();
        let batch = cross_entropy(&Tensor::from_vec(&[1, k], logits.clone()).unwrap(), &[label]).unwrap();
        let want = ce_oracle(&logits, label);
        worst_ce = worst_ce.max((row - want).abs()).max((batch - want).abs());
    }
    let uniform = cross_entropy_row(&[0.7f64; 4], 2).unwrap().0;
    let ln4_ok = (uniform - 4f64.ln()).abs() < 1e-6 && (uniform - 1.3863).abs() < 5e-5;

    let margin = 1.0;
    let mut worst_con: f64 = 0.0;
    let mut zero_cases = 0;
    let (mut fv_all, mut fa_all, mut ys, mut oracle_sum) = (Vec::new(), Vec::new(), Vec::new(), 0.0);
    let dim = 16;
    for case in 0..100 {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, y): (Vec<f64>, bool) = match case % 4 {
            // matched, identical embeddings
            0 => (v.clone(), true),
            // mismatched, pushed to at least the margin
            1 => {
                let dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
                let r = margin * rng.random_range(1.0..2.0);
                (v.iter().zip(&dir).map(|(x, d)| x + r * d / n).collect(), false)
            }
            _ => (
                v.iter().map(|x| x + rng.random_range(-0.2..0.2)).collect(),
                rng.random::<bool>(),
            ),
        };
        let (got, _, _) = contrastive_row(&v, &a, y, margin).unwrap();
        let want = contrastive_oracle(&v, &a, y, margin);
        if case % 4 < 2 {
            zero_cases += (got == 0.0 && want == 0.0) as usize;
        }
        worst_con = worst_con.max((got - want).abs());
        oracle_sum += want;
        fv_all.extend(v);
        fa_all.extend(a);
        ys.push(y);
    }
    let batch = contrastive(
        &Tensor::from_vec(&[100, dim], fv_all).unwrap(),
        &Tensor::from_vec(&[100, dim], fa_all).unwrap(),
        &ys,
        &ContrastiveConfig { margin },
    )
    .unwrap();
    worst_con = worst_con.max((batch - oracle_sum / 100.0).abs());
    let elapsed = started.elapsed();
    verdict(
        worst_ce < 1e-6 && worst_con < 1e-6 && ln4_ok && zero_cases == 50 && within(elapsed, 1.0),
        format!(
            "ce max err {worst_ce:.2e}, uniform 4-class {uniform:.6}, contrastive max err {worst_con:.2e}, \
             zero cases {zero_cases}/50, {:.3}s",
            elapsed.as_secs_f64()
        ),
    )
}

// ------------------------------------------------------------- gradients

fn gradients() -> Verdict {
    let started = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    let mut record = |label: &str, dtype: &str, tol: f64, r: GradReport| {
        let pass = r.passes(tol) && layers_sampled(&r);
        ok &= pass;
        lines.push(format!("{label}/{dtype} {:.1e}", r.max_rel_error));
    };
    fn run<T: Scalar>(record: &mut dyn FnMut(&str, &str, f64, GradReport)) {
        let tol = tolerance::<T>();
        for v in [Variant::Cnn, Variant::CnnRnn, Variant::CnnLstm] {
            record(v.name(), T::DTYPE, tol, audio_report::<T>(v));
        }
        record("3dcnn", T::DTYPE, tol, video_report::<T>());
        let (ce, con) = two_stream_reports::<T>();
        record("two_stream_ce", T::DTYPE, tol, ce);
        record("two_stream_contrastive", T::DTYPE, tol, con);
    }
    run::<f64>(&mut record);
    run::<f32>(&mut record);
    let elapsed = started.elapsed();
    verdict(
        ok && within(elapsed, 120.0),
        format!("{}; {:.1}s", lines.join(", "), elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- shapes

fn shapes() -> Verdict {
    let started = Instant::now();
    let mut problems = Vec::new();
    let b = 2;
    let spec: Tensor<f32> = Tensor::full(&[b, 3, 200, 300], 0.1);
    let clips: Tensor<f32> = Tensor::full(&[b, 3, 20, 100, 60], 0.1);
    for k in [3, 4] {
        for v in [Variant::Cnn, Variant::CnnRnn, Variant::CnnLstm] {
            let mut net = AudioNet::<f32>::new(&ModelConfig::new(v, k), OutputMode::Logits, 1);
            let s = net.forward_batch(&spec).unwrap().shape().to_vec();
            if s != [b, k] {
                problems.push(format!("{v} K={k}: {s:?}"));
            }
        }
        let cfg = ModelConfig::new(Variant::TwoStream, k);
        let s = TwoStream::<f32>::new(&cfg, 1).forward_batch(&spec, &clips).unwrap().shape().to_vec();
        if s != [b, k] {
            problems.push(format!("two_stream K={k}: {s:?}"));
        }
    }
    let s = VideoNet::<f32>::new(&ModelConfig::new(Variant::TwoStream, 4), 1)
        .forward_batch(&clips)
        .unwrap()
        .shape()
        .to_vec();
    if s != [b, 128] {
        problems.push(format!("3dcnn: {s:?}"));
    }

    // stored arrays from short, exact and long utterances under every segmentation
    let root = scratch("shapes");
    let mut arrays = 0;
    for (i, duration) in [0.4, 3.0, 7.3].into_iter().enumerate() {
        for seg in SegmentSpec::ALL {
            let dir = root.join(format!("{seg}-{i}"));
            let cfg = FixtureConfig {
                classes: ClassMode::Three,
                utterances_per_class: 1,
                duration_s: duration,
                video: true,
                seed: i as u64,
                preprocess: PreprocessConfig { segment: seg, ..PreprocessConfig::default() },
                ..FixtureConfig::default()
            };
            generate_synthetic_fixture(&dir, &cfg).unwrap();
            for e in build_manifest(&dir, seg, Modality::AudioVideo).unwrap().examples {
                let sp = npy::read(&dir.join(&e.spectrogram)).unwrap().shape;
                let cl = npy::read(&dir.join(e.clip.as_ref().unwrap())).unwrap().shape;
                if sp != [200, 300, 3] || cl != [20, 100, 60, 3] {
                    problems.push(format!("{seg} {duration}s: spectrogram {sp:?}, clip {cl:?}"));
                }
                arrays += 2;
            }
        }
    }
    let _ = fs::remove_dir_all(&root);
    let elapsed = started.elapsed();
    verdict(
        problems.is_empty() && within(elapsed, 30.0),
        format!(
            "{} model outputs and {arrays} stored arrays checked, problems {:?}; {:.1}s",
            3 * 2 + 2 + 1,
            problems,
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- counts

fn fake_example(label: Emotion, utt: usize, seg: usize, video: bool) -> Example {
    let utterance_id = format!("{}{utt:05}", label.initial());
    let id = format!("{utterance_id}_{seg}");
    Example {
        spectrogram: PathBuf::from(format!("audio/{id}.npy")),
        clip: video.then(|| PathBuf::from(format!("video/{id}.clip"))),
        id,
        utterance_id,
        segment_index: seg,
        label,
        augmentation: Augmentation::Original,
        rotation_deg: 0.0,
        split: None,
    }
}

/// `count` segments per class, two per utterance.
fn fake_manifest(counts: &[(Emotion, usize)], video: bool) -> Manifest {
    let examples = counts
        .iter()
        .flat_map(|&(label, n)| (0..n).map(move |i| fake_example(label, i / 2, i % 2, video)))
        .collect();
    let modality = if video { Modality::AudioVideo } else { Modality::Audio };
    Manifest::new(SegmentSpec::Ds2, modality, examples)
}

fn counts() -> Verdict {
    let table = [
        (Emotion::Happy, 786),
        (Emotion::Sad, 1752),
        (Emotion::Anger, 1458),
        (Emotion::Neutral, 2118),
    ];
    let balanced = balance_and_split(&fake_manifest(&table, false), 2000, 0.8, 3).unwrap();
    let (train, val) = (balanced.split(Split::Train), balanced.split(Split::Val));
    let per_class = |m: &Manifest| m.class_counts().values().copied().collect::<Vec<_>>();
    let augmented = augment(&balanced, 3).split(Split::Train);
    let train_utts = train.utterances(None);
    let val_utts = val.utterances(None);
    let shared = train_utts.intersection(&val_utts).count();
    let disjoint = 100.0 * (1.0 - shared as f64 / val_utts.len() as f64);
    let pass = per_class(&train) == [1600; 4]
        && per_class(&val) == [400; 4]
        && train.len() == 6400
        && augmented.len() == 19200
        && shared == 0;
    verdict(
        pass,
        format!(
            "train per class {:?}, val per class {:?}, train total {}, augmented {}, utterance disjointness {disjoint:.1}%",
            per_class(&train),
            per_class(&val),
            train.len(),
            augmented.len()
        ),
    )
}

// --------------------------------------------------------------- sampler

fn sampler() -> Verdict {
    let m = fake_manifest(
        &[(Emotion::Happy, 40), (Emotion::Sad, 60), (Emotion::Anger, 50), (Emotion::Neutral, 70)],
        true,
    );
    let pairs = sample_contrastive_pairs(&m, 10_000, &PairRatios::default(), 11).unwrap();
    let mut by_type: BTreeMap<&str, usize> = BTreeMap::new();
    let mut violations = 0;
    for p in &pairs {
        let (c, s) = (&m.examples[p.clip_example], &m.examples[p.spec_example]);
        let ok = match p.pair_type {
            PairType::Positive => p.y && c.id == s.id,
            PairType::HardNegative => !p.y && c.label != s.label && c.utterance_id != s.utterance_id,
            PairType::SuperHardNegative => !p.y && c.label == s.label && c.utterance_id != s.utterance_id,
        };
        violations += !ok as usize;
        let name = match p.pair_type {
            PairType::Positive => "positive",
            PairType::HardNegative => "hard",
            PairType::SuperHardNegative => "super_hard",
        };
        *by_type.entry(name).or_default() += 1;
    }
    let shares: BTreeMap<&str, f64> = by_type.iter().map(|(k, &n)| (*k, n as f64 / pairs.len() as f64)).collect();
    let balanced = shares.len() == 3 && shares.values().all(|s| (s - 1.0 / 3.0).abs() <= 0.02);
    verdict(
        pairs.len() == 10_000 && balanced && violations == 0,
        format!("{} pairs, shares {shares:.4?}, violations {violations}", pairs.len()),
    )
}

// ------------------------------------------------------- training helpers

fn fixture(root: &Path, classes: ClassMode, utterances: usize, video: bool, seed: u64) -> Manifest {
    let cfg = FixtureConfig { classes, utterances_per_class: utterances, video, seed, ..FixtureConfig::default() };
    generate_synthetic_fixture(root, &cfg).unwrap();
    let modality = if video { Modality::AudioVideo } else { Modality::Audio };
    build_manifest(root, SegmentSpec::Ds2, modality).unwrap()
}

fn split(m: &Manifest, train: usize, val: usize, seed: u64) -> Manifest {
    balance_and_split(m, train + val, train as f64 / (train + val) as f64, seed).unwrap()
}

fn fit(
    net: &mut Network<f32>,
    root: &Path,
    m: &Manifest,
    cfg: &TrainConfig,
    init: Option<&Checkpoint>,
    out_dir: Option<&Path>,
) -> TrainOutcome {
    let mut log = |r: &HistoryRecord| {
        eprintln!(
            "    iteration {:>4} loss {:.4} val {:?} train {:?}",
            r.iteration, r.loss, r.val_accuracy, r.train_accuracy
        );
        Control::Continue
    };
    let opts = TrainOptions { out_dir, init, resume: None, on_eval: Some(&mut log) };
    train_supervised(net, root, m, cfg, opts).unwrap()
}

// --------------------------------------------------------------- overfit

fn overfit() -> Verdict {
    let started = Instant::now();
    let root = scratch("overfit");
    let m = fixture(&root, ClassMode::Four, 16, false, 21);
    let m = m.with_examples(m.examples.iter().map(|e| Example { split: Some(Split::Train), ..e.clone() }).collect());
    let cfg = TrainConfig {
        batch_size: 16,
        epochs: 50,
        max_iterations: Some(200),
        eval_train: true,
        seed: 21,
        ..TrainConfig::default()
    };
    let mut net = Network::<f32>::new(&ModelConfig::new(Variant::CnnRnn, 4), 21).unwrap();
    let mut reached = None;
    let mut stop = |r: &HistoryRecord| {
        eprintln!("    iteration {:>4} loss {:.4} train {:?}", r.iteration, r.loss, r.train_accuracy);
        if r.train_accuracy.is_some_and(|a| a >= 0.95) {
            reached = Some((r.iteration, r.train_accuracy.unwrap()));
            Control::Stop
        } else {
            Control::Continue
        }
    };
    let out = train_supervised(&mut net, &root, &m, &cfg, TrainOptions { on_eval: Some(&mut stop), ..Default::default() })
        .unwrap();
    let _ = fs::remove_dir_all(&root);
    let elapsed = started.elapsed();
    let best = out.history.iter().filter_map(|r| r.train_accuracy).fold(0.0, f64::max);
    verdict(
        m.len() == 64 && reached.is_some_and(|(it, _)| it <= 200) && within(elapsed, 600.0),
        format!(
            "{} examples, reached {reached:?} (iteration, train accuracy), best {best:.3} after {} iterations; {:.0}s",
            m.len(),
            out.iterations,
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------- separability

fn separability() -> Verdict {
    let started = Instant::now();
    let root = scratch("separability");
    let mut notes = Vec::new();
    let mut ok = true;

    // four classes, audio only
    let four = root.join("four");
    let m4 = split(&fixture(&four, ClassMode::Four, 240, false, 31), 200, 40, 31);
    let cfg4 = TrainConfig { batch_size: 16, epochs: 5, seed: 31, ..TrainConfig::default() };
    let mut net = Network::<f32>::new(&ModelConfig::new(Variant::CnnRnn, 4), 31).unwrap();
    let out = fit(&mut net, &four, &m4, &cfg4, None, None);
    let best4 = out.best_val_accuracy.unwrap_or(0.0);
    ok &= best4 >= 0.8;
    notes.push(format!(
        "4-class CNN+RNN best val {best4:.3} (final {:.3}) in {} iterations",
        out.final_val_accuracy.unwrap_or(0.0),
        out.iterations
    ));

    // three classes, audio vs audio+video
    let three = root.join("three");
    let m3 = split(&fixture(&three, ClassMode::Three, 60, true, 41), 40, 20, 41);
    let cfg3 = TrainConfig {
        batch_size: 16,
        epochs: 5,
        pretrain_epochs: 5,
        class_mode: ClassMode::Three,
        seed: 41,
        ..TrainConfig::default()
    };
    let mut audio = Network::<f32>::new(&ModelConfig::new(Variant::CnnRnn, 3), 41).unwrap();
    let audio_acc = fit(&mut audio, &three, &m3, &cfg3, None, None).best_val_accuracy.unwrap_or(0.0);

    let model = ModelConfig::new(Variant::TwoStream, 3);
    let mut two = TwoStream::<f32>::new(&model, 41);
    let pre = pretrain(&mut two, &three, &m3, &cfg3, None).unwrap();
    let losses = &pre.epoch_mean_loss;
    let decreasing = losses.len() == 5 && losses[4] < losses[0];
    let val = m3.split(Split::Val);
    let pairs = sample_contrastive_pairs(&val, 300, &PairRatios::default(), 43).unwrap();
    let dist = pair_distances(&mut two, &three, &val, &pairs).unwrap();
    let init = Checkpoint::capture(&mut two, &model, 0, 41);
    let mut fused = Network::<f32>::new(&model, 41).unwrap();
    let fused_acc = fit(&mut fused, &three, &m3, &cfg3, Some(&init), None).best_val_accuracy.unwrap_or(0.0);
    ok &= decreasing && dist.positive < dist.negative && fused_acc >= audio_acc - 0.02;
    notes.push(format!(
        "3-class audio {audio_acc:.3} vs two-stream {fused_acc:.3}; pretrain epoch losses {:.4?}; \
         val pair distance positive {:.4} negative {:.4}",
        losses, dist.positive, dist.negative
    ));

    let _ = fs::remove_dir_all(&root);
    let elapsed = started.elapsed();
    notes.push(format!("{:.0}s", elapsed.as_secs_f64()));
    verdict(ok && within(elapsed, 1800.0), notes.join("; "))
}

// ----------------------------------------------------------- determinism

fn determinism() -> Verdict {
    let root = scratch("determinism");
    let data = root.join("data");
    let m = augment(&split(&fixture(&data, ClassMode::Three, 6, true, 51), 4, 2, 51), 51);
    let model = ModelConfig {
        conv_channels: [4, 4, 8],
        fc_hidden: 16,
        rnn_hidden: 8,
        embedding_dim: 8,
        video_channels: [2, 2, 4, 4],
        video_fc_hidden: 8,
        ..ModelConfig::new(Variant::TwoStream, 3)
    };
    let cfg = TrainConfig {
        batch_size: 4,
        epochs: 2,
        pretrain_epochs: 2,
        eval_every: 3,
        class_mode: ClassMode::Three,
        seed: 51,
        ..TrainConfig::default()
    };
    let run = |name: &str| -> (Vec<u8>, Vec<u8>) {
        let (pre_dir, run_dir) = (root.join(format!("{name}-pre")), root.join(format!("{name}-run")));
        fs::create_dir_all(&pre_dir).unwrap();
        fs::create_dir_all(&run_dir).unwrap();
        let mut two = TwoStream::<f32>::new(&model, 51);
        pretrain(&mut two, &data, &m, &cfg, Some(&pre_dir)).unwrap();
        let init = Checkpoint::capture(&mut two, &model, 0, 51);
        let mut net = Network::<f32>::new(&model, 51).unwrap();
        let opts = TrainOptions { out_dir: Some(&run_dir), init: Some(&init), ..Default::default() };
        train_supervised(&mut net, &data, &m, &cfg, opts).unwrap();
        (fs::read(pre_dir.join(HISTORY_FILE)).unwrap(), fs::read(run_dir.join(HISTORY_FILE)).unwrap())
    };
    let (a, b) = (run("a"), run("b"));
    let _ = fs::remove_dir_all(&root);
    verdict(
        a == b && !a.1.is_empty(),
        format!(
            "pretraining history {} bytes equal: {}; supervised history {} bytes equal: {}",
            a.0.len(),
            a.0 == b.0,
            a.1.len(),
            a.1 == b.1
        ),
    )
}

// ------------------------------------------------------------ evaluation

/// Zero weights except a bias favouring class 0.
fn constant_predictor(k: usize) -> Network<f32> {
    let mut net = Network::<f32>::new(&ModelConfig::new(Variant::CnnRnn, k), 0).unwrap();
    net.visit_params("", &mut |name, p| {
        p.value.fill(0.0);
        if name == "out.bias" {
            p.value.data_mut()[0] = 1.0;
        }
    });
    net
}

fn evaluation() -> Verdict {
    let root = scratch("evaluation");
    let mut notes = Vec::new();
    let mut ok = true;
    for (mode, seed) in [(ClassMode::Four, 61), (ClassMode::Three, 62)] {
        let k = mode.count();
        let dir = root.join(format!("k{k}"));
        let m = split(&fixture(&dir, mode, 14, false, seed), 8, 6, seed);
        let val = m.split(Split::Val);
        let counts: Vec<u64> = mode.classes().iter().map(|e| val.class_counts()[e] as u64).collect();

        // a briefly trained model: arbitrary but non-trivial predictions
        let cfg = TrainConfig { batch_size: 8, epochs: 1, class_mode: mode, seed, ..TrainConfig::default() };
        let mut net = Network::<f32>::new(&ModelConfig::new(Variant::Cnn, k), seed).unwrap();
        train_supervised(&mut net, &dir, &m, &cfg, TrainOptions::default()).unwrap();
        let e = evaluate(&mut net, &dir, &val, mode).unwrap();
        let rows_ok = e.confusion.row_sums() == counts && e.confusion.total() as usize == val.len();
        let mean_class = e.per_class_accuracy.iter().sum::<f64>() / k as f64;
        let mean_ok = (e.overall_accuracy - mean_class).abs() < 1e-9;

        // shuffled order gives the same matrix
        let mut shuffled = val.examples.clone();
        shuffled.reverse();
        let order_ok = evaluate(&mut net, &dir, &val.with_examples(shuffled), mode).unwrap().confusion == e.confusion;

        let constant = evaluate(&mut constant_predictor(k), &dir, &val, mode).unwrap().overall_accuracy;
        let constant_ok = constant == 1.0 / k as f64;
        ok &= rows_ok && mean_ok && order_ok && constant_ok;
        notes.push(format!(
            "K={k}: row sums {:?} vs counts {counts:?}, overall {:.4} vs mean per-class {mean_class:.4}, \
             order-invariant {order_ok}, constant predictor {constant}",
            e.confusion.row_sums(),
            e.overall_accuracy
        ));
    }
    let _ = fs::remove_dir_all(&root);
    verdict(ok, notes.join("; "))
}

fn main() {
    let criteria: [(&str, &str, fn() -> Verdict); 9] = [
        ("losses", "loss oracles", losses),
        ("gradients", "gradient checks", gradients),
        ("shapes", "shape suite", shapes),
        ("counts", "data-count reproduction", counts),
        ("sampler", "contrastive sampler", sampler),
        ("overfit", "overfit sanity", overfit),
        ("separability", "synthetic separability", separability),
        ("determinism", "determinism", determinism),
        ("evaluation", "evaluation", evaluation),
    ];
    let wanted: BTreeSet<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (key, title, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(key) {
            continue;
        }
        let v = check();
        failed += !v.pass as usize;
        println!("{} {title}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
