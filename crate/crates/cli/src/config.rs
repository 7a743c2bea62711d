//! Run configuration: defaults, then the TOML file, then `EMOFUSE_<SECTION>__<KEY>`
//! environment variables, then command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use emofuse::dataset::{FixtureConfig, PreprocessConfig};
use emofuse::models::ModelConfig;
use emofuse::signal::{DspConfig, SegmentSpec};
use emofuse::training::TrainConfig;

pub const CONFIG_FILE: &str = "config.toml";
pub const RUN_FILE: &str = "run.json";
pub const ENV_PREFIX: &str = "EMOFUSE_";

/// Invalid configuration or arguments; the process exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub jobs: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { jobs: 1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw corpus (labels.jsonl, audio/*.wav, video/*.emv).
    pub raw: Option<PathBuf>,
    /// Preprocessed dataset root.
    pub data: Option<PathBuf>,
    /// Output directory of the command.
    pub out: Option<PathBuf>,
    /// Training run read by `eval` and `report`.
    pub run: Option<PathBuf>,
    /// Initial weights for supervised training.
    pub init: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub segment: SegmentSpec,
    pub seed: u64,
    pub force: bool,
    /// Examples per class after balancing, split by `train_fraction`.
    pub per_class_total: usize,
    pub train_fraction: f64,
    pub augment: bool,
    /// Synthetic fixture settings.
    pub utterances_per_class: usize,
    pub duration_s: f64,
    pub snr: f64,
    pub video: bool,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let f = FixtureConfig::default();
        DatasetSection {
            segment: SegmentSpec::Ds2,
            seed: 0,
            force: false,
            per_class_total: 2000,
            train_fraction: 0.8,
            augment: true,
            utterances_per_class: f.utterances_per_class,
            duration_s: f.duration_s,
            snr: f.snr,
            video: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub paths: Paths,
    pub signal: DspConfig,
    pub dataset: DatasetSection,
    pub models: ModelConfig,
    pub training: TrainConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let wrap = |r: emofuse::Result<()>| r.map_err(|e| config_error(e.to_string()));
        wrap(self.signal.validate())?;
        wrap(self.models.validate())?;
        wrap(self.training.validate())?;
        if self.models.num_classes != self.training.class_mode.count() {
            return Err(config_error(format!(
                "models.num_classes = {} but training.class_mode = {}",
                self.models.num_classes,
                self.training.class_mode.count()
            )));
        }
        let d = &self.dataset;
        if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) || d.per_class_total < 2 {
            return Err(config_error("dataset: need 0 < train_fraction < 1 and per_class_total >= 2"));
        }
        Ok(())
    }

    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            segment: self.dataset.segment,
            dsp: self.signal.clone(),
            seed: self.dataset.seed,
            force: self.dataset.force,
        }
    }

    pub fn fixture(&self) -> FixtureConfig {
        FixtureConfig {
            classes: self.training.class_mode,
            utterances_per_class: self.dataset.utterances_per_class,
            duration_s: self.dataset.duration_s,
            sample_rate_hz: self.signal.sample_rate_hz,
            snr: self.dataset.snr,
            video: self.dataset.video,
            seed: self.dataset.seed,
            raw_dir: self.paths.raw.clone(),
            preprocess: self.preprocess(),
            jobs: self.run.jobs,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).context("serializing the run config")
    }
}

/// One `section.key = value` assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub section: String,
    pub key: String,
    pub value: toml::Value,
}

impl Override {
    pub fn new(section: &str, key: &str, value: impl Into<toml::Value>) -> Self {
        Override {
            section: section.into(),
            key: key.into(),
            value: value.into(),
        }
    }

    /// Parses `section.key=value`; the value is read as a TOML literal, falling
    /// back to a plain string.
    pub fn parse(s: &str) -> Result<Self> {
        let (path, raw) = s
            .split_once('=')
            .ok_or_else(|| config_error(format!("expected section.key=value, got {s:?}")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| config_error(format!("expected section.key, got {path:?}")))?;
        Ok(Override {
            section: section.to_string(),
            key: key.to_string(),
            value: parse_value(raw.trim()),
        })
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// `EMOFUSE_TRAINING__LEARNING_RATE=1e-3` style overrides, sorted by name.
pub fn env_overrides(vars: impl Iterator<Item = (String, String)>) -> Vec<Override> {
    let mut out: Vec<(String, Override)> = vars
        .filter_map(|(name, value)| {
            let rest = name.strip_prefix(ENV_PREFIX)?;
            let (section, key) = rest.split_once("__")?;
            Some((
                name.clone(),
                Override {
                    section: section.to_ascii_lowercase(),
                    key: key.to_ascii_lowercase(),
                    value: parse_value(&value),
                },
            ))
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out.into_iter().map(|(_, o)| o).collect()
}

fn merge(base: &mut toml::Table, layer: toml::Table) {
    for (k, v) in layer {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(l)) => merge(b, l),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Resolves the configuration; every failure here is a [`ConfigError`].
pub fn resolve(file: Option<&Path>, overrides: &[Override]) -> Result<RunConfig> {
    let mut table = toml::Table::try_from(RunConfig::default()).context("serializing defaults")?;
    if let Some(path) = file {
        let text = fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        let layer: toml::Table = toml::from_str(&text)
            .map_err(|e| config_error(format!("config {}: {e}", path.display())))?;
        merge(&mut table, layer);
    }
    for o in overrides {
        let section = table
            .entry(o.section.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(section) = section else {
            return Err(config_error(format!("{} is not a section", o.section)));
        };
        section.insert(o.key.clone(), o.value.clone());
    }
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| config_error(format!("invalid configuration: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Git-style object hash: SHA-256 over `blob <len>\0<content>`.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()));
    h.update(content);
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub inputs: Vec<InputHash>,
    /// Hash over the config hash and every input hash.
    pub content_hash: String,
}

/// Writes `config.toml` and `run.json` into `dir`. Inputs that do not exist
/// are skipped.
pub fn record_run(dir: &Path, command: &str, cfg: &RunConfig, inputs: &[PathBuf]) -> Result<RunRecord> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let text = cfg.to_toml()?;
    let config_hash = blob_hash(text.as_bytes());
    let mut hashes = Vec::new();
    for p in inputs.iter().filter(|p| p.is_file()) {
        let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
        hashes.push(InputHash {
            path: p.clone(),
            hash: blob_hash(&bytes),
        });
    }
    let mut all = config_hash.clone();
    for h in &hashes {
        all.push('\n');
        all.push_str(&h.hash);
    }
    let record = RunRecord {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash,
        inputs: hashes,
        content_hash: blob_hash(all.as_bytes()),
    };
    fs::write(dir.join(CONFIG_FILE), text).with_context(|| format!("writing {}", dir.display()))?;
    fs::write(dir.join(RUN_FILE), serde_json::to_string_pretty(&record)? + "\n")
        .with_context(|| format!("writing {}", dir.display()))?;
    Ok(record)
}
