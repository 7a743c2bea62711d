//! Accuracy, confusion matrices and static training reports.

mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{load_input, ClassMode, Manifest};
use crate::error::{Error, Result};
use crate::models::{argmax, Network};
use crate::nn::Ctx;
use crate::tensor::Scalar;
use crate::training::HistoryRecord;

pub use plot::{render_heatmap, render_line_plot, Series};

pub const METRICS_FILE: &str = "metrics.json";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const CONFUSION_PLOT: &str = "confusion.png";
pub const LOSS_PLOT: &str = "history_loss.png";
pub const ACCURACY_PLOT: &str = "history_acc.png";
pub const SUMMARY_FILE: &str = "summary_table.csv";

/// Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_predictions(k: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::shape(format!("{} predictions", truth.len()), predicted.len()));
        }
        let mut cm = ConfusionMatrix::new(k);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.add(t, p)?;
        }
        Ok(cm)
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let k = self.k();
        if truth >= k || predicted >= k {
            return Err(Error::Label(format!("class pair ({truth}, {predicted}) outside [0, {k})")));
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn total(&self) -> u64 {
        self.row_sums().iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    /// `trace / total`; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }

    /// Recall of each true class; 0 for classes with no examples.
    pub fn per_class_accuracy(&self) -> Vec<f64> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, row)| match row.iter().sum::<u64>() {
                0 => 0.0,
                n => row[i] as f64 / n as f64,
            })
            .collect()
    }

    pub fn to_csv(&self, labels: &[String]) -> String {
        let mut out = String::from("true\\predicted");
        for l in labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in labels.iter().zip(&self.counts) {
            out.push_str(l);
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub labels: Vec<String>,
    pub examples: usize,
    pub overall_accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub confusion: ConfusionMatrix,
}

impl Evaluation {
    pub fn from_confusion(confusion: ConfusionMatrix, labels: Vec<String>) -> Self {
        Evaluation {
            examples: confusion.total() as usize,
            overall_accuracy: confusion.accuracy(),
            per_class_accuracy: confusion.per_class_accuracy(),
            labels,
            confusion,
        }
    }

    /// Writes `metrics.json` and `confusion.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let metrics = dir.join(METRICS_FILE);
        fs::write(&metrics, serde_json::to_string_pretty(self)? + "\n")
            .map_err(|e| Error::io(&metrics, e))?;
        let csv = dir.join(CONFUSION_FILE);
        fs::write(&csv, self.confusion.to_csv(&self.labels)).map_err(|e| Error::io(&csv, e))
    }
}

pub fn class_labels(mode: ClassMode) -> Vec<String> {
    mode.classes().iter().map(|e| e.name().to_string()).collect()
}

/// Argmax predictions of `net` (dropout off) for every example of `m`.
pub fn predict<T: Scalar>(net: &mut Network<T>, root: &Path, m: &Manifest) -> Result<Vec<usize>> {
    let with_clip = net.config().variant.uses_video();
    m.examples
        .iter()
        .map(|e| {
            let x = load_input::<T>(root, e, with_clip)?;
            Ok(argmax(net.forward(&x, &mut Ctx::eval())?.data()))
        })
        .collect()
}

/// Accuracy and confusion matrix of `net` over all examples of `m`.
pub fn evaluate<T: Scalar>(
    net: &mut Network<T>,
    root: &Path,
    m: &Manifest,
    mode: ClassMode,
) -> Result<Evaluation> {
    if net.config().num_classes != mode.count() {
        return Err(Error::Config(format!(
            "model has {} classes but evaluation asks for {}",
            net.config().num_classes,
            mode.count()
        )));
    }
    if m.is_empty() {
        return Err(Error::EmptyInput("nothing to evaluate".into()));
    }
    let truth = m.label_indices(mode)?;
    let predicted = predict(net, root, m)?;
    let cm = ConfusionMatrix::from_predictions(mode.count(), &truth, &predicted)?;
    Ok(Evaluation::from_confusion(cm, class_labels(mode)))
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub architecture: String,
    pub accuracy: f64,
    pub augmented: bool,
    /// Class set, e.g. `H,S,A,N`.
    pub emotions: String,
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("Architecture,Accuracy,Data Aug.,Emotion\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.2},{},\"{}\"\n",
            r.architecture,
            100.0 * r.accuracy,
            if r.augmented { "Yes" } else { "No" },
            r.emotions
        ));
    }
    out
}

/// Files written by [`report`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportFiles {
    pub written: Vec<PathBuf>,
    pub skipped: Vec<String>,
}

/// Loss and accuracy curves, the confusion heat map and CSV, and the summary
/// table. Empty series are skipped with a warning.
pub fn report(
    history: &[HistoryRecord],
    eval: Option<&Evaluation>,
    summary: &[SummaryRow],
    dir: &Path,
) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = ReportFiles::default();
    let mut write = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        files.written.push(path);
        Ok(())
    };

    let loss: Vec<(f64, f64)> = history.iter().map(|r| (r.iteration as f64, r.loss)).collect();
    let val: Vec<(f64, f64)> = history
        .iter()
        .filter_map(|r| r.val_accuracy.map(|a| (r.iteration as f64, a)))
        .collect();
    let train: Vec<(f64, f64)> = history
        .iter()
        .filter_map(|r| r.train_accuracy.map(|a| (r.iteration as f64, a)))
        .collect();
    let mut skipped = Vec::new();
    if loss.is_empty() {
        log::warn!("history has no loss entries; skipping {LOSS_PLOT}");
        skipped.push(LOSS_PLOT.to_string());
    } else {
        write(LOSS_PLOT, render_line_plot(&[Series::new(&loss, [200, 40, 40])], None)?)?;
    }
    if val.is_empty() && train.is_empty() {
        log::warn!("history has no accuracy entries; skipping {ACCURACY_PLOT}");
        skipped.push(ACCURACY_PLOT.to_string());
    } else {
        let series = [Series::new(&val, [40, 80, 200]), Series::new(&train, [40, 160, 60])];
        write(ACCURACY_PLOT, render_line_plot(&series, Some((0.0, 1.0)))?)?;
    }
    if let Some(e) = eval {
        write(CONFUSION_FILE, e.confusion.to_csv(&e.labels).into_bytes())?;
        write(CONFUSION_PLOT, render_heatmap(e.confusion.counts())?)?;
        write(METRICS_FILE, (serde_json::to_string_pretty(e)? + "\n").into_bytes())?;
    }
    if !summary.is_empty() {
        write(SUMMARY_FILE, summary_csv(summary).into_bytes())?;
    }
    files.skipped = skipped;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_tallied_three_class() {
        let truth = [0, 0, 1, 1, 1, 2, 2, 0, 2];
        let pred = [0, 1, 1, 1, 2, 2, 0, 0, 2];
        let cm = ConfusionMatrix::from_predictions(3, &truth, &pred).unwrap();
        assert_eq!(cm.counts(), &[vec![2, 1, 0], vec![0, 2, 1], vec![1, 0, 2]]);
        assert_eq!(cm.row_sums(), vec![3, 3, 3]);
        assert!((cm.accuracy() - 6.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_constant_predictors() {
        let truth: Vec<usize> = (0..1600).map(|i| i % 4).collect();
        let cm = ConfusionMatrix::from_predictions(4, &truth, &truth).unwrap();
        assert_eq!(cm.accuracy(), 1.0);
        for i in 0..4 {
            assert_eq!(cm.counts()[i][i], 400);
        }
        let zeros = vec![0; truth.len()];
        let cm = ConfusionMatrix::from_predictions(4, &truth, &zeros).unwrap();
        assert_eq!(cm.accuracy(), 0.25);
        assert!(ConfusionMatrix::from_predictions(4, &[4], &[0]).is_err());
    }

    #[test]
    fn summary_uses_two_decimals() {
        let row = SummaryRow {
            architecture: "CNN+RNN".into(),
            accuracy: 0.54,
            augmented: true,
            emotions: "H,S,A,N".into(),
        };
        assert_eq!(
            summary_csv(&[row]),
            "Architecture,Accuracy,Data Aug.,Emotion\nCNN+RNN,54.00,Yes,\"H,S,A,N\"\n"
        );
    }

    proptest! {
        #[test]
        fn balanced_overall_equals_mean_per_class(
            k in 3usize..=4,
            per_class in 1usize..30,
            preds in proptest::collection::vec(0usize..4, 120),
        ) {
            let truth: Vec<usize> = (0..k * per_class).map(|i| i % k).collect();
            let pred: Vec<usize> = truth.iter().enumerate().map(|(i, _)| preds[i % preds.len()] % k).collect();
            let cm = ConfusionMatrix::from_predictions(k, &truth, &pred).unwrap();
            let mean = cm.per_class_accuracy().iter().sum::<f64>() / k as f64;
            prop_assert!((cm.accuracy() - mean).abs() < 1e-9);
            prop_assert_eq!(cm.total() as usize, truth.len());
            prop_assert!(cm.row_sums().iter().all(|&r| r as usize == per_class));
        }

        #[test]
        fn order_invariant(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..60), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let a = ConfusionMatrix::from_predictions(4, &t, &p).unwrap();
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut crate::rng::stream(seed, crate::rng::Purpose::Shuffle, 0));
            let (t, p): (Vec<usize>, Vec<usize>) = shuffled.into_iter().unzip();
            prop_assert_eq!(a, ConfusionMatrix::from_predictions(4, &t, &p).unwrap());
        }
    }
}
