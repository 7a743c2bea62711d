use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{error, info, warn};
use serde::{Deserialize, Serialize};

use emofuse::dataset::{
    augment, balance_and_split, build_manifest, generate_synthetic_fixture, preprocess_corpus, Augmentation,
    Manifest, Modality, Split, LABELS_FILE, META_FILE,
};
use emofuse::evaluation::{evaluate, report, Evaluation, SummaryRow, CONFUSION_FILE, METRICS_FILE};
use emofuse::models::{Checkpoint, Network, TwoStream, Variant};
use emofuse::training::{
    pretrain, read_history, train_supervised, TrainOptions, BEST_CHECKPOINT, HISTORY_FILE, LAST_CHECKPOINT,
};

use crate::config::{config_error, record_run, RunConfig};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const EVAL_DIR: &str = "eval";
pub const REPORT_DIR: &str = "report";

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| config_error(format!("no {what} given (flag or [paths] entry)")))
}

fn existing_dir<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    let dir = required(p, what)?;
    if !dir.is_dir() {
        return Err(config_error(format!("{what} {} does not exist", dir.display())));
    }
    Ok(dir)
}

fn dataset_inputs(data: &Path) -> Vec<PathBuf> {
    vec![data.join(LABELS_FILE), data.join(META_FILE)]
}

pub fn preprocess(cfg: &RunConfig) -> Result<()> {
    let raw = existing_dir(&cfg.paths.raw, "input directory")?;
    let out = required(&cfg.paths.data, "output directory")?;
    if !raw.join(LABELS_FILE).is_file() {
        return Err(config_error(format!("{} has no {LABELS_FILE}", raw.display())));
    }
    let summary = preprocess_corpus(raw, out, &cfg.preprocess(), cfg.run.jobs)?;
    record_run(out, "preprocess", cfg, &dataset_inputs(raw))?;
    info!(
        "{} utterances: {} segments written, {} already present",
        summary.utterances, summary.written, summary.skipped
    );
    for (id, e) in &summary.failed {
        error!("{id}: {e}");
    }
    if !summary.failed.is_empty() {
        anyhow::bail!("{} of {} utterances failed", summary.failed.len(), summary.utterances);
    }
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let out = required(&cfg.paths.data, "output directory")?;
    let summary = generate_synthetic_fixture(out, &cfg.fixture())?;
    record_run(out, "synth", cfg, &[])?;
    info!("{} utterances, {} segments under {}", summary.utterances, summary.segments, out.display());
    Ok(())
}

/// Balanced, split and (optionally) augmented manifest for `variant`.
fn training_manifest(cfg: &RunConfig, data: &Path, video: bool) -> Result<Manifest> {
    let modality = if video { Modality::AudioVideo } else { Modality::Audio };
    let m = build_manifest(data, cfg.dataset.segment, modality)?.restrict(cfg.training.class_mode);
    if m.is_empty() {
        return Err(config_error(format!(
            "{} holds no {} examples",
            data.display(),
            cfg.training.class_mode.label()
        )));
    }
    let d = &cfg.dataset;
    let m = balance_and_split(&m, d.per_class_total, d.train_fraction, d.seed)?;
    Ok(if d.augment { augment(&m, d.seed) } else { m })
}

pub fn pretrain_cmd(cfg: &RunConfig) -> Result<()> {
    let data = existing_dir(&cfg.paths.data, "data directory")?;
    let out = required(&cfg.paths.out, "output directory")?;
    let model = emofuse::models::ModelConfig {
        variant: Variant::TwoStream,
        ..cfg.models.clone()
    };
    let m = training_manifest(cfg, data, true)?;
    record_run(out, "pretrain", cfg, &dataset_inputs(data))?;
    m.save(&out.join(MANIFEST_FILE))?;
    let mut net = TwoStream::<f32>::new(&model, cfg.training.seed);
    let outcome = pretrain(&mut net, data, &m, &cfg.training, Some(out))?;
    for (e, loss) in outcome.epoch_mean_loss.iter().enumerate() {
        info!("pretrain epoch {e}: mean contrastive loss {loss:.4}");
    }
    Ok(())
}

pub fn train_cmd(cfg: &RunConfig, resume: bool) -> Result<()> {
    let data = existing_dir(&cfg.paths.data, "data directory")?;
    let out = required(&cfg.paths.out, "output directory")?;
    let video = cfg.models.variant.uses_video();
    let manifest_path = out.join(MANIFEST_FILE);
    let m = if resume && manifest_path.is_file() {
        Manifest::load(&manifest_path)?
    } else {
        training_manifest(cfg, data, video)?
    };
    let resume_ck = if resume {
        let path = out.join(LAST_CHECKPOINT);
        Some(Checkpoint::load(&path).with_context(|| format!("resuming from {}", path.display()))?)
    } else {
        None
    };
    let init = cfg.paths.init.as_deref().map(Checkpoint::load).transpose()?;
    let mut inputs = dataset_inputs(data);
    inputs.extend(cfg.paths.init.clone());
    record_run(out, "train", cfg, &inputs)?;
    m.save(&manifest_path)?;

    let mut net = Network::<f32>::new(&cfg.models, cfg.training.seed)?;
    let outcome = train_supervised(
        &mut net,
        data,
        &m,
        &cfg.training,
        TrainOptions {
            out_dir: Some(out),
            init: init.as_ref(),
            resume: resume_ck.as_ref(),
            on_eval: None,
        },
    )?;
    info!(
        "{} iterations; best val accuracy {:?} at {:?}; final {:?}",
        outcome.iterations, outcome.best_val_accuracy, outcome.best_iteration, outcome.final_val_accuracy
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetrics {
    pub checkpoint: String,
    pub iteration: u64,
    pub variant: Variant,
    #[serde(flatten)]
    pub evaluation: Evaluation,
}

/// Loads `path` into a fresh network and scores it on the validation split.
fn evaluate_checkpoint(cfg: &RunConfig, data: &Path, m: &Manifest, path: &Path) -> Result<CheckpointMetrics> {
    let ck = Checkpoint::load(path)?;
    let mode = cfg.training.class_mode;
    if ck.config.num_classes != mode.count() {
        return Err(config_error(format!(
            "{} was trained for {} classes; evaluation asks for {}",
            path.display(),
            ck.config.num_classes,
            mode.count()
        )));
    }
    let mut net = Network::<f32>::new(&ck.config, 0)?;
    ck.restore(&mut net)?;
    let val = m.split(Split::Val).restrict(mode);
    let evaluation = evaluate(&mut net, data, &val, mode)?;
    Ok(CheckpointMetrics {
        checkpoint: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        iteration: ck.iteration,
        variant: ck.config.variant,
        evaluation,
    })
}

/// Evaluates the best and last checkpoints of a run (or one explicit file).
pub fn eval_cmd(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<()> {
    let data = existing_dir(&cfg.paths.data, "data directory")?;
    let run = cfg.paths.run.as_deref();
    let out = match (&cfg.paths.out, run) {
        (Some(o), _) => o.clone(),
        (None, Some(r)) => r.join(EVAL_DIR),
        (None, None) => return Err(config_error("eval needs --run or --out")),
    };
    let checkpoints: Vec<PathBuf> = match (checkpoint, run) {
        (Some(c), _) => vec![c.to_path_buf()],
        (None, Some(r)) => [BEST_CHECKPOINT, LAST_CHECKPOINT]
            .iter()
            .map(|n| r.join(n))
            .filter(|p| p.is_file())
            .collect(),
        (None, None) => return Err(config_error("eval needs --run or --checkpoint")),
    };
    if checkpoints.is_empty() {
        return Err(config_error("no checkpoints to evaluate"));
    }
    let saved = run.map(|r| r.join(MANIFEST_FILE)).filter(|p| p.is_file());
    let m = match &saved {
        Some(p) => Manifest::load(p)?,
        None => {
            let video = Checkpoint::load(&checkpoints[0])?.config.variant.uses_video();
            training_manifest(cfg, data, video)?
        }
    };
    let mut inputs = dataset_inputs(data);
    inputs.extend(checkpoints.iter().cloned());
    inputs.extend(saved);
    record_run(&out, "eval", cfg, &inputs)?;

    let results = checkpoints
        .iter()
        .map(|p| evaluate_checkpoint(cfg, data, &m, p))
        .collect::<Result<Vec<_>>>()?;
    for r in &results {
        info!(
            "{} (iteration {}): accuracy {:.4} on {} examples",
            r.checkpoint, r.iteration, r.evaluation.overall_accuracy, r.evaluation.examples
        );
    }
    let metrics = out.join(METRICS_FILE);
    fs::write(&metrics, serde_json::to_string_pretty(&results)? + "\n")
        .with_context(|| format!("writing {}", metrics.display()))?;
    let primary = &results[0].evaluation;
    fs::write(out.join(CONFUSION_FILE), primary.confusion.to_csv(&primary.labels))
        .with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

/// Plots and the summary table for a finished run.
pub fn report_cmd(cfg: &RunConfig, eval_dir: Option<&Path>) -> Result<()> {
    let run = existing_dir(&cfg.paths.run, "run directory")?;
    let out = cfg.paths.out.clone().unwrap_or_else(|| run.join(REPORT_DIR));
    let history_path = run.join(HISTORY_FILE);
    if !history_path.is_file() {
        return Err(config_error(format!("{} has no {HISTORY_FILE}", run.display())));
    }
    let history = read_history(&history_path)?;
    if history.is_empty() {
        return Err(config_error(format!("{} is empty", history_path.display())));
    }
    let eval_dir = eval_dir.map(Path::to_path_buf).unwrap_or_else(|| run.join(EVAL_DIR));
    let metrics_path = eval_dir.join(METRICS_FILE);
    let metrics: Vec<CheckpointMetrics> = if metrics_path.is_file() {
        serde_json::from_str(&fs::read_to_string(&metrics_path)?)
            .with_context(|| format!("reading {}", metrics_path.display()))?
    } else {
        warn!("no {} found; the summary table will be empty", metrics_path.display());
        Vec::new()
    };
    let manifest_path = run.join(MANIFEST_FILE);
    let augmented = manifest_path.is_file()
        && Manifest::load(&manifest_path)?
            .examples
            .iter()
            .any(|e| e.augmentation != Augmentation::Original);
    let rows: Vec<SummaryRow> = metrics
        .iter()
        .map(|r| SummaryRow {
            architecture: format!("{} [{}]", r.variant.display_name(), r.checkpoint.trim_end_matches(".ckpt")),
            accuracy: r.evaluation.overall_accuracy,
            augmented,
            emotions: cfg.training.class_mode.label(),
        })
        .collect();
    record_run(&out, "report", cfg, &[history_path, metrics_path])?;
    let files = report(&history, metrics.first().map(|r| &r.evaluation), &rows, &out)?;
    for f in &files.written {
        info!("wrote {}", f.display());
    }
    Ok(())
}
