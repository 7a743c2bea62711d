//! Labeled example manifests over a preprocessed dataset root.
//!
//! # Dataset root layout
//!
//! ```text
//! root/meta.json                 {"version": 1, "segment": "DS2", "seed": 7, "generator": "..."}
//! root/labels.jsonl              one line per utterance:
//!                                {"id": "...", "label": "sad", "side": "left", "head_box": [x0, y0, x1, y1]}
//! root/audio/<uttId>_<segIdx>.npy   float32 (200, 300, 3) spectrogram, values in [0, 1]
//! root/audio/<uttId>_<segIdx>.json  sidecar: source id, segment spec, offset, seed
//! root/video/<uttId>_<segIdx>.clip  uint8 npy (20, 100, 60, 3) head-crop clip
//! root/video/<uttId>_<segIdx>.json  sidecar: window and crop region
//! ```
//!
//! `side` and `head_box` are only needed when clips are extracted. Utterance
//! ids may contain `_`; the segment index is the part after the last one.

mod augment;
mod balance;
mod batches;
mod fixture;
mod pairs;
mod pipeline;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SegmentSpec;
use crate::vision::{CropRegion, Side};

pub use augment::{apply_augmentation, augment};
pub use balance::balance_and_split;
pub use batches::make_batches;
pub use fixture::{
    fixture_band_hz, generate_synthetic_fixture, FixtureConfig, FixtureSummary, SyntheticVideo,
};
pub use pairs::{sample_contrastive_pairs, ContrastivePair, PairRatios, PairType};
pub use pipeline::{
    clip_tensor, load_input, preprocess_corpus, preprocess_utterance, spectrogram_tensor,
    PreprocessConfig, PreprocessSummary,
};

pub const LABELS_FILE: &str = "labels.jsonl";
pub const META_FILE: &str = "meta.json";
pub const AUDIO_DIR: &str = "audio";
pub const VIDEO_DIR: &str = "video";
pub const SPEC_EXT: &str = "npy";
pub const CLIP_EXT: &str = "clip";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Happy,
    Sad,
    Anger,
    Neutral,
}

impl Emotion {
    pub fn name(self) -> &'static str {
        match self {
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Anger => "anger",
            Emotion::Neutral => "neutral",
        }
    }

    pub fn initial(self) -> char {
        match self {
            Emotion::Happy => 'H',
            Emotion::Sad => 'S',
            Emotion::Anger => 'A',
            Emotion::Neutral => 'N',
        }
    }
}

impl std::str::FromStr for Emotion {
    type Err = Error;

    /// Accepts full names and the usual three-letter corpus codes.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "happy" | "hap" | "happiness" | "h" => Ok(Emotion::Happy),
            "sad" | "sadness" | "s" => Ok(Emotion::Sad),
            "anger" | "ang" | "angry" | "a" => Ok(Emotion::Anger),
            "neutral" | "neu" | "n" => Ok(Emotion::Neutral),
            other => Err(Error::Label(format!("unknown emotion {other:?}"))),
        }
    }
}

impl std::fmt::Display for Emotion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Active class set: all four emotions, or sad/anger/neutral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ClassMode {
    Four,
    Three,
}

impl ClassMode {
    pub fn from_count(k: usize) -> Result<Self> {
        match k {
            4 => Ok(ClassMode::Four),
            3 => Ok(ClassMode::Three),
            _ => Err(Error::Config(format!("class mode must be 3 or 4, got {k}"))),
        }
    }

    pub fn classes(self) -> &'static [Emotion] {
        match self {
            ClassMode::Four => &[Emotion::Happy, Emotion::Sad, Emotion::Anger, Emotion::Neutral],
            ClassMode::Three => &[Emotion::Sad, Emotion::Anger, Emotion::Neutral],
        }
    }

    pub fn count(self) -> usize {
        self.classes().len()
    }

    pub fn index(self, e: Emotion) -> Option<usize> {
        self.classes().iter().position(|&c| c == e)
    }

    /// Table label such as `H,S,A,N`.
    pub fn label(self) -> String {
        self.classes()
            .iter()
            .map(|e| e.initial().to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl TryFrom<u8> for ClassMode {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        ClassMode::from_count(v as usize)
    }
}

impl From<ClassMode> for u8 {
    fn from(m: ClassMode) -> u8 {
        m.count() as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    Original,
    /// top 10 rows removed, resized back
    Crop10,
    /// rotated by `rotation_deg` about the center
    Rotate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Audio,
    AudioVideo,
}

/// One preprocessed segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub utterance_id: String,
    pub segment_index: usize,
    pub label: Emotion,
    /// Relative to the dataset root.
    pub spectrogram: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<PathBuf>,
    pub augmentation: Augmentation,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub rotation_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// First line of a serialized manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestHeader {
    version: u32,
    segment: SegmentSpec,
    modality: Modality,
    examples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub segment: SegmentSpec,
    pub modality: Modality,
    pub examples: Vec<Example>,
}

impl Manifest {
    pub fn new(segment: SegmentSpec, modality: Modality, examples: Vec<Example>) -> Self {
        Manifest {
            segment,
            modality,
            examples,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn with_examples(&self, examples: Vec<Example>) -> Self {
        Manifest {
            segment: self.segment,
            modality: self.modality,
            examples,
        }
    }

    pub fn split(&self, split: Split) -> Manifest {
        self.with_examples(
            self.examples
                .iter()
                .filter(|e| e.split == Some(split))
                .cloned()
                .collect(),
        )
    }

    /// Drops examples whose label is outside the class set.
    pub fn restrict(&self, mode: ClassMode) -> Manifest {
        self.with_examples(
            self.examples
                .iter()
                .filter(|e| mode.index(e.label).is_some())
                .cloned()
                .collect(),
        )
    }

    /// Label indices under `mode`; errors on labels outside the class set.
    pub fn label_indices(&self, mode: ClassMode) -> Result<Vec<usize>> {
        self.examples
            .iter()
            .map(|e| {
                mode.index(e.label).ok_or_else(|| {
                    Error::Config(format!(
                        "example {} is {}, outside the {}-class set",
                        e.id,
                        e.label,
                        mode.count()
                    ))
                })
            })
            .collect()
    }

    pub fn class_counts(&self) -> BTreeMap<Emotion, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.examples {
            *counts.entry(e.label).or_insert(0) += 1;
        }
        counts
    }

    pub fn utterances(&self, split: Option<Split>) -> BTreeSet<&str> {
        self.examples
            .iter()
            .filter(|e| split.is_none() || e.split == split)
            .map(|e| e.utterance_id.as_str())
            .collect()
    }

    /// JSON lines: a header, then one example per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = ManifestHeader {
            version: DATASET_VERSION,
            segment: self.segment,
            modality: self.modality,
            examples: self.examples.len(),
        };
        let io = |e| Error::io(path, e);
        writeln!(w, "{}", serde_json::to_string(&header)?).map_err(io)?;
        for e in &self.examples {
            writeln!(w, "{}", serde_json::to_string(e)?).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let bad = |m: String| Error::Manifest(format!("{}: {m}", path.display()));
        let first = lines
            .next()
            .ok_or_else(|| bad("empty file".into()))?
            .map_err(|e| Error::io(path, e))?;
        let header: ManifestHeader =
            serde_json::from_str(&first).map_err(|e| bad(format!("header: {e}")))?;
        let mut examples = Vec::with_capacity(header.examples);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            examples.push(
                serde_json::from_str(&line).map_err(|e| bad(format!("line {}: {e}", i + 2)))?,
            );
        }
        if examples.len() != header.examples {
            return Err(bad(format!(
                "header announces {} examples, found {}",
                header.examples,
                examples.len()
            )));
        }
        Ok(Manifest::new(header.segment, header.modality, examples))
    }
}

/// One line of `labels.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub label: Emotion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_box: Option<[f64; 4]>,
}

impl LabelRecord {
    pub fn region(&self) -> Result<CropRegion> {
        let side = self.side.ok_or_else(|| {
            Error::Manifest(format!("utterance {} has no actor side for video cropping", self.id))
        })?;
        CropRegion::new(side, self.head_box.unwrap_or(CropRegion::DEFAULT_HEAD_BOX))
    }
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                Error::Manifest(format!("{} line {}: {e}", path.display(), i + 1))
            })
        })
        .collect()
}

pub fn write_labels(path: &Path, labels: &[LabelRecord]) -> Result<()> {
    let mut text = String::new();
    for r in labels {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub version: u32,
    pub segment: SegmentSpec,
    pub seed: u64,
    pub generator: String,
}

impl DatasetMeta {
    pub fn load(root: &Path) -> Result<Option<Self>> {
        let path = root.join(META_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        let path = root.join(META_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(&path, e))
    }
}

/// Splits `<uttId>_<segIdx>` at the last underscore.
pub fn parse_segment_stem(stem: &str) -> Option<(&str, usize)> {
    let (utt, idx) = stem.rsplit_once('_')?;
    if utt.is_empty() {
        return None;
    }
    Some((utt, idx.parse().ok()?))
}

pub fn segment_stem(utterance_id: &str, index: usize) -> String {
    format!("{utterance_id}_{index}")
}

/// Indexes the preprocessed segments under `root` (see the module docs for
/// the layout). Examples are ordered by id.
pub fn build_manifest(root: &Path, segment: SegmentSpec, modality: Modality) -> Result<Manifest> {
    if let Some(meta) = DatasetMeta::load(root)? {
        if meta.segment != segment {
            return Err(Error::Manifest(format!(
                "{} was preprocessed as {}, not {}",
                root.display(),
                meta.segment,
                segment
            )));
        }
    }
    let audio_dir = root.join(AUDIO_DIR);
    let mut stems = Vec::new();
    if audio_dir.is_dir() {
        for entry in fs::read_dir(&audio_dir).map_err(|e| Error::io(&audio_dir, e))? {
            let path = entry.map_err(|e| Error::io(&audio_dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some(SPEC_EXT) {
                continue;
            }
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    if stems.is_empty() {
        log::warn!("no spectrograms under {}; manifest is empty", audio_dir.display());
        return Ok(Manifest::new(segment, modality, Vec::new()));
    }
    let labels_path = root.join(LABELS_FILE);
    let labels: BTreeMap<String, Emotion> = if labels_path.exists() {
        read_labels(&labels_path)?
            .into_iter()
            .map(|r| (r.id, r.label))
            .collect()
    } else {
        BTreeMap::new()
    };

    let mut examples = Vec::with_capacity(stems.len());
    let mut unlabeled = Vec::new();
    let mut no_clip = Vec::new();
    let mut malformed = Vec::new();
    for stem in &stems {
        let Some((utt, idx)) = parse_segment_stem(stem) else {
            malformed.push(stem.clone());
            continue;
        };
        let Some(&label) = labels.get(utt) else {
            unlabeled.push(stem.clone());
            continue;
        };
        let clip = Path::new(VIDEO_DIR).join(format!("{stem}.{CLIP_EXT}"));
        let clip = match modality {
            Modality::Audio => None,
            Modality::AudioVideo if root.join(&clip).is_file() => Some(clip),
            Modality::AudioVideo => {
                no_clip.push(stem.clone());
                continue;
            }
        };
        examples.push(Example {
            id: stem.clone(),
            utterance_id: utt.to_string(),
            segment_index: idx,
            label,
            spectrogram: Path::new(AUDIO_DIR).join(format!("{stem}.{SPEC_EXT}")),
            clip,
            augmentation: Augmentation::Original,
            rotation_deg: 0.0,
            split: None,
        });
    }
    let mut problems = Vec::new();
    if !malformed.is_empty() {
        problems.push(format!("names not of the form <utt>_<seg>: {}", malformed.join(", ")));
    }
    if !unlabeled.is_empty() {
        problems.push(format!("no label for: {}", unlabeled.join(", ")));
    }
    if !no_clip.is_empty() {
        problems.push(format!("missing video clip for: {}", no_clip.join(", ")));
    }
    if !problems.is_empty() {
        return Err(Error::Manifest(problems.join("; ")));
    }
    Ok(Manifest::new(segment, modality, examples))
}
