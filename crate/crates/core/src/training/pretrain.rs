use std::path::Path;
use std::time::Instant;

use super::step::{run_batch, Embeddings, Mode, Objective, Target};
use super::{
    epoch_mean_losses, write_history, write_timing, Adam, EpochTiming, HistoryRecord, TrainConfig,
    HISTORY_FILE, PRETRAINED_CHECKPOINT, TIMING_FILE,
};
use crate::dataset::{
    clip_tensor, sample_contrastive_pairs, spectrogram_tensor, Augmentation, ContrastivePair,
    Manifest, Modality, Split,
};
use crate::error::{Error, Result};
use crate::models::{Checkpoint, Input, TwoStream};
use crate::nn::{Ctx, Parameterized};
use crate::rng;
use crate::tensor::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainOutcome {
    pub history: Vec<HistoryRecord>,
    pub epoch_mean_loss: Vec<f64>,
}

fn pair_input<T: Scalar>(root: &Path, m: &Manifest, p: &ContrastivePair) -> Result<Input<T>> {
    Ok(Input {
        spec: spectrogram_tensor(root, &m.examples[p.spec_example])?,
        clip: Some(clip_tensor(root, &m.examples[p.clip_example])?),
    })
}

/// Examples pretraining draws from: the un-augmented train split, or the
/// whole manifest when it carries no split.
fn pool(m: &Manifest) -> Manifest {
    let has_split = m.examples.iter().any(|e| e.split.is_some());
    m.with_examples(
        m.examples
            .iter()
            .filter(|e| e.augmentation == Augmentation::Original)
            .filter(|e| !has_split || e.split == Some(Split::Train))
            .cloned()
            .collect(),
    )
}

pub(crate) fn epoch_pair_seed(seed: u64, epoch: u64) -> u64 {
    seed ^ rng::key(&format!("pretrain-epoch-{epoch}"))
}

/// Self-supervised pretraining: for `pretrain_epochs`, draw fresh
/// (clip, spectrogram) pairs and minimize the contrastive loss between the
/// two embeddings. The run directory, when given, receives the checkpoint and
/// history.
pub fn pretrain<T: Scalar>(
    net: &mut TwoStream<T>,
    root: &Path,
    manifest: &Manifest,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<PretrainOutcome> {
    cfg.validate()?;
    if manifest.modality != Modality::AudioVideo {
        return Err(Error::Precondition("pretraining needs an audio+video manifest".into()));
    }
    let m = pool(manifest);
    let count = cfg.pairs_per_epoch.unwrap_or(m.len());
    let objective = Objective::Contrastive { margin: cfg.margin };
    let mut adam = Adam::new(cfg.adam());
    let mut history = Vec::new();
    let mut timing = Vec::new();
    let mut iteration = 0u64;
    for epoch in 0..cfg.pretrain_epochs as u64 {
        let started = Instant::now();
        let pairs = sample_contrastive_pairs(&m, count, &cfg.pair_ratios, epoch_pair_seed(cfg.seed, epoch))?;
        for chunk in pairs.chunks(cfg.batch_size) {
            iteration += 1;
            let inputs = chunk
                .iter()
                .map(|p| pair_input(root, &m, p))
                .collect::<Result<Vec<Input<T>>>>()?;
            let targets: Vec<Target> = chunk.iter().map(|p| Target::Matched(p.y)).collect();
            let mut model = Embeddings(&mut *net);
            model.zero_grad();
            let stats = run_batch(
                &mut model,
                objective,
                &inputs,
                &targets,
                Mode::Train { seed: cfg.seed, iteration },
                true,
            )?;
            adam.update(&mut model);
            history.push(HistoryRecord {
                iteration,
                epoch,
                loss: stats.loss,
                val_accuracy: None,
                train_accuracy: None,
            });
        }
        timing.push(EpochTiming {
            epoch,
            iterations: pairs.len().div_ceil(cfg.batch_size) as u64,
            wall_s: started.elapsed().as_secs_f64(),
        });
        log::info!("pretrain epoch {epoch}: mean loss {:.4}", epoch_mean_losses(&history).last().unwrap_or(&0.0));
    }
    if let Some(dir) = out_dir {
        let model_cfg = net.config().clone();
        Checkpoint::capture(net, &model_cfg, iteration, cfg.seed).save(&dir.join(PRETRAINED_CHECKPOINT))?;
        write_history(&dir.join(HISTORY_FILE), &history)?;
        write_timing(&dir.join(TIMING_FILE), &timing)?;
    }
    Ok(PretrainOutcome {
        epoch_mean_loss: epoch_mean_losses(&history),
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDistances {
    pub positive: f64,
    pub negative: f64,
}

/// Mean embedding distance `|f_v - f_a|` over positive and negative pairs,
/// dropout off.
pub fn pair_distances<T: Scalar>(
    net: &mut TwoStream<T>,
    root: &Path,
    manifest: &Manifest,
    pairs: &[ContrastivePair],
) -> Result<PairDistances> {
    let (mut pos, mut neg) = ((0.0, 0usize), (0.0, 0usize));
    for p in pairs {
        let x: Input<T> = pair_input(root, manifest, p)?;
        let clip = x.clip.as_ref().expect("pair inputs carry clips");
        let (fa, fv) = net.embed(&x.spec, clip, &mut Ctx::eval())?;
        let d = fa
            .data()
            .iter()
            .zip(fv.data())
            .map(|(a, v)| (a.f64() - v.f64()).powi(2))
            .sum::<f64>()
            .sqrt();
        let slot = if p.y { &mut pos } else { &mut neg };
        slot.0 += d;
        slot.1 += 1;
    }
    if pos.1 == 0 || neg.1 == 0 {
        return Err(Error::Sampling("need both positive and negative pairs".into()));
    }
    Ok(PairDistances {
        positive: pos.0 / pos.1 as f64,
        negative: neg.0 / neg.1 as f64,
    })
}
