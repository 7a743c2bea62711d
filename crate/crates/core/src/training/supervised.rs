use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::step::{run_batch, Mode, Objective, Target};
use super::{
    read_history, write_history, write_timing, Adam, EpochTiming, HistoryRecord, TrainConfig,
    BEST_CHECKPOINT, HISTORY_FILE, LAST_CHECKPOINT, TIMING_FILE,
};
use crate::dataset::{load_input, make_batches, Augmentation, Manifest, Split};
use crate::error::{Error, Result};
use crate::evaluation::evaluate;
use crate::models::{Checkpoint, Input, Network};
use crate::nn::Parameterized;
use crate::tensor::Scalar;

/// Returned by the evaluation callback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Run directory for history, timing and checkpoints; nothing is written without one.
    pub out_dir: Option<&'a Path>,
    /// Initial weights, e.g. from contrastive pretraining.
    pub init: Option<&'a Checkpoint>,
    /// Continue an interrupted run from its last checkpoint.
    pub resume: Option<&'a Checkpoint>,
    /// Called after each evaluation record.
    pub on_eval: Option<&'a mut dyn FnMut(&HistoryRecord) -> Control>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<HistoryRecord>,
    pub iterations: u64,
    pub best_val_accuracy: Option<f64>,
    pub best_iteration: Option<u64>,
    /// Validation accuracy of the final weights.
    pub final_val_accuracy: Option<f64>,
    pub stopped_early: bool,
}

/// Where a run stands; stored in checkpoint `extra`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Position {
    epoch: u64,
    next_batch: usize,
    adam_step: u64,
    best_val_accuracy: Option<f64>,
    best_iteration: Option<u64>,
}

pub(crate) fn load_batch<T: Scalar>(
    root: &Path,
    m: &Manifest,
    idx: &[usize],
    with_clip: bool,
    labels: &[usize],
) -> Result<(Vec<Input<T>>, Vec<Target>)> {
    let inputs = idx
        .iter()
        .map(|&i| load_input(root, &m.examples[i], with_clip))
        .collect::<Result<Vec<_>>>()?;
    Ok((inputs, idx.iter().map(|&i| Target::Class(labels[i])).collect()))
}

fn checkpoint<T: Scalar>(
    net: &mut Network<T>,
    adam: &Adam<T>,
    iteration: u64,
    cfg: &TrainConfig,
    pos: Position,
) -> Result<Checkpoint> {
    let model_cfg = net.config().clone();
    let mut ck = Checkpoint::capture(net, &model_cfg, iteration, cfg.seed);
    ck.extra = serde_json::to_value(pos)?;
    ck.tensors.extend(adam.state_tensors());
    Ok(ck)
}

/// Minimizes cross-entropy on the train split with Adam, recording validation
/// accuracy every `eval_every` iterations. With a run directory, the
/// best-validation and last checkpoints are kept there.
pub fn train_supervised<T: Scalar>(
    net: &mut Network<T>,
    root: &Path,
    manifest: &Manifest,
    cfg: &TrainConfig,
    opts: TrainOptions<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mode = cfg.class_mode;
    if net.config().num_classes != mode.count() {
        return Err(Error::Config(format!(
            "model has {} classes but training uses {}",
            net.config().num_classes,
            mode.count()
        )));
    }
    if let Some(e) = manifest.examples.iter().find(|e| mode.index(e.label).is_none()) {
        return Err(Error::Config(format!(
            "manifest holds {} examples but the class set is {}",
            e.label,
            mode.label()
        )));
    }
    let train = manifest.split(Split::Train);
    let val = manifest.split(Split::Val);
    if train.is_empty() {
        return Err(Error::Precondition("manifest has no training examples".into()));
    }
    let train_plain = train.with_examples(
        train
            .examples
            .iter()
            .filter(|e| e.augmentation == Augmentation::Original)
            .cloned()
            .collect(),
    );
    let labels = train.label_indices(mode)?;
    let with_clip = net.config().variant.uses_video();

    if let Some(init) = opts.init {
        init.restore(net)?;
    }
    let mut adam = Adam::new(cfg.adam());
    let mut history = Vec::new();
    let mut pos = Position {
        epoch: 0,
        next_batch: 0,
        adam_step: 0,
        best_val_accuracy: None,
        best_iteration: None,
    };
    if let Some(ck) = opts.resume {
        ck.restore(net)?;
        pos = serde_json::from_value(ck.extra.clone())
            .map_err(|e| Error::Checkpoint(format!("no resume position: {e}")))?;
        adam.load_state(pos.adam_step, &ck.tensors)?;
        if let Some(dir) = opts.out_dir {
            let path = dir.join(HISTORY_FILE);
            if path.is_file() {
                history = read_history(&path)?;
                history.retain(|r| r.iteration <= ck.iteration);
            }
        }
    }
    let mut iteration = opts.resume.map_or(0, |c| c.iteration);
    let mut on_eval = opts.on_eval;
    let mut timing = Vec::new();
    let mut stopped_early = false;
    let budget_left = |it: u64| cfg.max_iterations.is_none_or(|m| it < m);

    'epochs: for epoch in pos.epoch..cfg.epochs as u64 {
        let started = Instant::now();
        let first_iteration = iteration;
        let batches = make_batches(train.len(), cfg.batch_size, cfg.seed, epoch)?;
        let start = if epoch == pos.epoch { pos.next_batch } else { 0 };
        for (b, idx) in batches.iter().enumerate().skip(start) {
            if !budget_left(iteration) {
                pos = Position { epoch, next_batch: b, ..pos };
                break 'epochs;
            }
            iteration += 1;
            let (inputs, targets) = load_batch::<T>(root, &train, idx, with_clip, &labels)?;
            net.zero_grad();
            let stats = run_batch(
                net,
                Objective::CrossEntropy,
                &inputs,
                &targets,
                Mode::Train { seed: cfg.seed, iteration },
                true,
            )?;
            adam.update(net);
            let mut record = HistoryRecord {
                iteration,
                epoch,
                loss: stats.loss,
                val_accuracy: None,
                train_accuracy: None,
            };
            pos = Position {
                epoch,
                next_batch: b + 1,
                adam_step: adam.step,
                ..pos
            };
            if iteration % cfg.eval_every == 0 {
                if !val.is_empty() {
                    let acc = evaluate(net, root, &val, mode)?.overall_accuracy;
                    record.val_accuracy = Some(acc);
                    if pos.best_val_accuracy.is_none_or(|best| acc > best) {
                        pos.best_val_accuracy = Some(acc);
                        pos.best_iteration = Some(iteration);
                        if let Some(dir) = opts.out_dir {
                            checkpoint(net, &adam, iteration, cfg, pos)?.save(&dir.join(BEST_CHECKPOINT))?;
                        }
                    }
                }
                if cfg.eval_train {
                    record.train_accuracy = Some(evaluate(net, root, &train_plain, mode)?.overall_accuracy);
                }
                log::info!(
                    "iteration {iteration}: loss {:.4} val {:?} train {:?}",
                    record.loss,
                    record.val_accuracy,
                    record.train_accuracy
                );
                let stop = on_eval.as_mut().is_some_and(|f| f(&record) == Control::Stop);
                history.push(record);
                if stop {
                    stopped_early = true;
                    break 'epochs;
                }
                continue;
            }
            history.push(record);
        }
        pos = Position { epoch: epoch + 1, next_batch: 0, ..pos };
        timing.push(EpochTiming {
            epoch,
            iterations: iteration - first_iteration,
            wall_s: started.elapsed().as_secs_f64(),
        });
        if let Some(dir) = opts.out_dir {
            checkpoint(net, &adam, iteration, cfg, pos)?.save(&dir.join(LAST_CHECKPOINT))?;
            write_history(&dir.join(HISTORY_FILE), &history)?;
        }
    }

    let final_val_accuracy = if val.is_empty() {
        None
    } else {
        Some(evaluate(net, root, &val, mode)?.overall_accuracy)
    };
    if let Some(dir) = opts.out_dir {
        checkpoint(net, &adam, iteration, cfg, pos)?.save(&dir.join(LAST_CHECKPOINT))?;
        write_history(&dir.join(HISTORY_FILE), &history)?;
        write_timing(&dir.join(TIMING_FILE), &timing)?;
    }
    Ok(TrainOutcome {
        history,
        iterations: iteration,
        best_val_accuracy: pos.best_val_accuracy,
        best_iteration: pos.best_iteration,
        final_val_accuracy,
        stopped_early,
    })
}
