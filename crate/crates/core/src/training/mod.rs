//! Optimization: contrastive pretraining of the two-stream model, supervised
//! cross-entropy training, and finite-difference gradient checks.
//!
//! A run directory holds `history.jsonl` (one record per iteration, fully
//! deterministic for a fixed seed), `timing.jsonl` (wall-clock per epoch) and
//! checkpoints.

mod gradcheck;
mod optim;
mod pretrain;
mod step;
mod supervised;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{ClassMode, PairRatios};
use crate::error::{Error, Result};

pub use gradcheck::{
    analytic_gradients, check_gradients, check_gradients_against, compare_gradients, GradCheckConfig, GradReport, ParamCheck,
};
pub use optim::{Adam, AdamConfig};
pub use pretrain::{pair_distances, pretrain, PairDistances, PretrainOutcome};
pub use step::{run_batch, BatchStats, Differentiable, Embeddings, Mode, Objective, Target};
pub use supervised::{train_supervised, Control, TrainOptions, TrainOutcome};

pub const HISTORY_FILE: &str = "history.jsonl";
pub const TIMING_FILE: &str = "timing.jsonl";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const PRETRAINED_CHECKPOINT: &str = "pretrained.ckpt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub l1: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub pretrain_epochs: usize,
    pub seed: u64,
    pub class_mode: ClassMode,
    /// Validation accuracy is recorded every this many iterations.
    pub eval_every: u64,
    /// Also record accuracy on the (un-augmented) training examples.
    pub eval_train: bool,
    /// Stop after this many iterations even mid-epoch.
    pub max_iterations: Option<u64>,
    pub margin: f64,
    pub pair_ratios: PairRatios,
    /// Contrastive pairs drawn per pretraining epoch; defaults to the number
    /// of training examples.
    pub pairs_per_epoch: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            weight_decay: 0.01,
            l1: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 64,
            // 4 x 19200 / 64 = 1200 iterations on the full augmented set
            epochs: 4,
            pretrain_epochs: 5,
            seed: 0,
            class_mode: ClassMode::Four,
            eval_every: 20,
            eval_train: false,
            max_iterations: None,
            margin: 1.0,
            pair_ratios: PairRatios::default(),
            pairs_per_epoch: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("training: {m}")));
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.learning_rate) || !finite_nonneg(self.weight_decay) || !finite_nonneg(self.l1) {
            return bad("learning_rate, weight_decay and l1 must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return bad("need betas in [0, 1) and eps > 0");
        }
        if self.batch_size == 0 || self.eval_every == 0 {
            return bad("batch_size and eval_every must be at least 1");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin must be positive");
        }
        if self.pairs_per_epoch == Some(0) {
            return bad("pairs_per_epoch must be positive");
        }
        self.pair_ratios.validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            l1: self.l1,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// One optimizer step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    /// 1-based, strictly increasing.
    pub iteration: u64,
    pub epoch: u64,
    /// Mean batch loss.
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTiming {
    pub epoch: u64,
    pub iterations: u64,
    pub wall_s: f64,
}

fn write_jsonl<R: Serialize>(path: &Path, records: &[R]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_jsonl<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<R>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Decode {
                what: format!("{} line {}", path.display(), i + 1),
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn write_history(path: &Path, history: &[HistoryRecord]) -> Result<()> {
    write_jsonl(path, history)
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRecord>> {
    read_jsonl(path)
}

pub fn write_timing(path: &Path, timing: &[EpochTiming]) -> Result<()> {
    write_jsonl(path, timing)
}

pub fn read_timing(path: &Path) -> Result<Vec<EpochTiming>> {
    read_jsonl(path)
}

/// Mean loss of each epoch, in epoch order.
pub fn epoch_mean_losses(history: &[HistoryRecord]) -> Vec<f64> {
    let mut out: Vec<(u64, f64, usize)> = Vec::new();
    for r in history {
        match out.last_mut() {
            Some((e, sum, n)) if *e == r.epoch => {
                *sum += r.loss;
                *n += 1;
            }
            _ => out.push((r.epoch, r.loss, 1)),
        }
    }
    out.into_iter().map(|(_, s, n)| s / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!((c.learning_rate, c.weight_decay, c.batch_size, c.pretrain_epochs), (1e-4, 0.01, 64, 5));
        assert!(TrainConfig { batch_size: 0, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { learning_rate: -1.0, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..c }.validate().is_ok());
    }

    #[test]
    fn history_round_trip_and_epoch_means() {
        let h = vec![
            HistoryRecord { iteration: 1, epoch: 0, loss: 1.0, val_accuracy: None, train_accuracy: None },
            HistoryRecord { iteration: 2, epoch: 0, loss: 3.0, val_accuracy: Some(0.5), train_accuracy: None },
            HistoryRecord { iteration: 3, epoch: 1, loss: 0.5, val_accuracy: None, train_accuracy: Some(1.0) },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(HISTORY_FILE);
        write_history(&p, &h).unwrap();
        assert_eq!(read_history(&p).unwrap(), h);
        assert!(!fs::read_to_string(&p).unwrap().lines().next().unwrap().contains("val_accuracy"));
        assert_eq!(epoch_mean_losses(&h), vec![2.0, 0.5]);
    }
}
