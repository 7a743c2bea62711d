//! Procedural labeled corpora for tests and smoke runs.
//!
//! Each emotion gets its own frequency band, amplitude-modulation rate and
//! level, buried in white noise. Video frames show two actor halves; a blob
//! inside the labeled actor's head box oscillates at an emotion-specific rate
//! and carries an emotion-specific tint, while the other half holds still.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    preprocess_utterance, write_labels, ClassMode, DatasetMeta, Emotion, LabelRecord,
    PreprocessConfig, AUDIO_DIR, DATASET_VERSION, LABELS_FILE, VIDEO_DIR,
};
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::rng::{self, stream, Purpose};
use crate::signal::{write_wav, Waveform};
use crate::vision::{write_emv, CropRegion, FrameSource, Side};

pub const FIXTURE_FPS: f64 = 30.0;
pub const FIXTURE_FRAME_WIDTH: usize = 160;
pub const FIXTURE_FRAME_HEIGHT: usize = 120;
const TONES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureConfig {
    pub classes: ClassMode,
    pub utterances_per_class: usize,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    /// Signal-to-noise power ratio.
    pub snr: f64,
    /// Also render video and clips.
    pub video: bool,
    pub seed: u64,
    /// When set, the raw corpus (wav, emv, labels) is written here as well.
    pub raw_dir: Option<PathBuf>,
    pub preprocess: PreprocessConfig,
    pub jobs: usize,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            classes: ClassMode::Four,
            utterances_per_class: 8,
            duration_s: 3.0,
            sample_rate_hz: crate::signal::CANONICAL_RATE_HZ,
            snr: 2.0,
            video: false,
            seed: 0,
            raw_dir: None,
            preprocess: PreprocessConfig::default(),
            jobs: 1,
        }
    }
}

impl FixtureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.utterances_per_class == 0 {
            return Err(Error::Config("fixture: utterances_per_class must be positive".into()));
        }
        if !(self.duration_s > 0.0) || !(self.snr > 0.0) {
            return Err(Error::Config("fixture: duration_s and snr must be positive".into()));
        }
        if self.sample_rate_hz != self.preprocess.dsp.sample_rate_hz {
            return Err(Error::Config(format!(
                "fixture: sample rate {} differs from the front end's {}",
                self.sample_rate_hz, self.preprocess.dsp.sample_rate_hz
            )));
        }
        let top = fixture_band_hz(Emotion::Neutral).1;
        if top >= self.sample_rate_hz as f64 / 2.0 {
            return Err(Error::Config(format!(
                "fixture: sample rate {} cannot hold the {top} Hz band",
                self.sample_rate_hz
            )));
        }
        self.preprocess.dsp.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSummary {
    pub root: PathBuf,
    pub utterances: usize,
    pub segments: usize,
}

fn class_index(e: Emotion) -> usize {
    e as usize
}

/// Band `[500 (c + 1), 500 (c + 1) + 300]` Hz holding the tones of emotion `c`.
pub fn fixture_band_hz(e: Emotion) -> (f64, f64) {
    let lo = 500.0 * (class_index(e) + 1) as f64;
    (lo, lo + 300.0)
}

fn utterance_id(e: Emotion, i: usize) -> String {
    format!("syn{}{i:04}", e.initial())
}

/// Noisy modulated tones for one utterance.
pub fn synthesize_waveform(e: Emotion, duration_s: f64, rate: u32, snr: f64, seed: u64) -> Result<Waveform> {
    let c = class_index(e);
    let mut rng = stream(seed, Purpose::Fixture, 0);
    let (lo, hi) = fixture_band_hz(e);
    let level = 0.03 * 2f64.powi(c as i32);
    let tones: Vec<(f64, f64, f64)> = (0..TONES)
        .map(|_| {
            let f = rng.random_range(lo..hi);
            let amp = level * 10f64.powf(rng.random_range(-1.5..1.5) / 20.0);
            (f, amp, rng.random_range(0.0..TAU))
        })
        .collect();
    let am_rate = (c + 1) as f64;
    let am_phase = rng.random_range(0.0..TAU);
    let n = (duration_s * rate as f64).round() as usize;
    let clean: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            let env = 0.6 + 0.4 * (TAU * am_rate * t + am_phase).sin();
            env * tones.iter().map(|&(f, a, p)| a * (TAU * f * t + p).sin()).sum::<f64>()
        })
        .collect();
    let power = clean.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64;
    let noise = Normal::new(0.0, (power / snr).sqrt())
        .map_err(|e| Error::Precondition(format!("noise level: {e}")))?;
    let samples = clean
        .into_iter()
        .map(|v| (v + noise.sample(&mut rng)).clamp(-1.0, 1.0) as f32)
        .collect();
    Waveform::new(samples, rate)
}

const BLOB_TINTS: [[f32; 3]; 4] = [[0.6, 0.45, 0.3], [0.3, 0.6, 0.45], [0.45, 0.3, 0.6], [0.6, 0.6, 0.15]];

/// Two-actor frames rendered on demand.
#[derive(Debug, Clone)]
pub struct SyntheticVideo {
    pub region: CropRegion,
    /// Blob oscillation in Hz.
    pub rate_hz: f64,
    /// RGB tint of the labeled actor's blob.
    pub tint: [f32; 3],
    pub phase: f64,
    pub frames: usize,
    pub seed: u64,
}

impl SyntheticVideo {
    pub fn new(e: Emotion, region: CropRegion, duration_s: f64, seed: u64) -> Self {
        let phase = stream(seed, Purpose::Fixture, 1).random_range(0.0..TAU);
        SyntheticVideo {
            region,
            rate_hz: 0.5 * (class_index(e) + 1) as f64,
            tint: BLOB_TINTS[class_index(e)],
            phase,
            frames: (duration_s * FIXTURE_FPS).ceil().max(1.0) as usize,
            seed,
        }
    }

    fn render(&self, index: usize) -> Image {
        let (h, w) = (FIXTURE_FRAME_HEIGHT, FIXTURE_FRAME_WIDTH);
        let mut img = Image::filled(h, w, 3, 0.35);
        let mut rng = stream(self.seed, Purpose::Fixture, (1 << 40) | index as u64);
        for v in &mut img.data {
            *v += rng.random_range(-0.05..0.05);
        }
        let half = w / 2;
        let [x0, y0, x1, y1] = self.region.head_box;
        let t = index as f64 / FIXTURE_FPS;
        for side in [Side::Left, Side::Right] {
            let base = if side == Side::Left { 0 } else { half };
            let (bw, bh) = ((x1 - x0) * half as f64, (y1 - y0) * h as f64);
            let cx = base as f64 + (x0 + x1) / 2.0 * half as f64;
            let mut cy = (y0 + y1) / 2.0 * h as f64;
            let mut tint = BLOB_TINTS[0];
            if side == self.region.side {
                cy += 0.3 * bh * (TAU * self.rate_hz * t + self.phase).sin();
                tint = self.tint;
            }
            let sigma = 0.15 * bw;
            for y in 0..h {
                for x in base..base + half {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    let g = (-d2 / (2.0 * sigma * sigma)).exp() as f32;
                    for (c, k) in tint.iter().enumerate() {
                        let v = img.at(y, x, c) + g * k;
                        img.set(y, x, c, v);
                    }
                }
            }
        }
        for v in &mut img.data {
            *v = v.clamp(0.0, 1.0);
        }
        img
    }
}

impl FrameSource for SyntheticVideo {
    fn fps(&self) -> f64 {
        FIXTURE_FPS
    }

    fn frame_count(&self) -> usize {
        self.frames
    }

    fn frame(&mut self, index: usize) -> Result<Image> {
        if index >= self.frames {
            return Err(Error::Range(format!("frame {index} of {}", self.frames)));
        }
        Ok(self.render(index))
    }
}

/// Writes a preprocessed synthetic dataset under `root` (plus the raw corpus
/// when `cfg.raw_dir` is set). Utterances are interleaved by class.
pub fn generate_synthetic_fixture(root: &Path, cfg: &FixtureConfig) -> Result<FixtureSummary> {
    cfg.validate()?;
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut records = Vec::new();
    for i in 0..cfg.utterances_per_class {
        for &e in cfg.classes.classes() {
            let id = utterance_id(e, i);
            let side = if (rng::key(&id) ^ cfg.seed) & 1 == 0 {
                Side::Left
            } else {
                Side::Right
            };
            records.push(LabelRecord {
                id,
                label: e,
                side: cfg.video.then_some(side),
                head_box: cfg.video.then_some(CropRegion::DEFAULT_HEAD_BOX),
            });
        }
    }
    write_labels(&root.join(LABELS_FILE), &records)?;
    DatasetMeta {
        version: DATASET_VERSION,
        segment: cfg.preprocess.segment,
        seed: cfg.seed,
        generator: "synthetic".into(),
    }
    .save(root)?;
    if let Some(raw) = &cfg.raw_dir {
        fs::create_dir_all(raw.join(AUDIO_DIR)).map_err(|e| Error::io(raw, e))?;
        if cfg.video {
            fs::create_dir_all(raw.join(VIDEO_DIR)).map_err(|e| Error::io(raw, e))?;
        }
        write_labels(&raw.join(LABELS_FILE), &records)?;
    }

    let segments = std::sync::atomic::AtomicUsize::new(0);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let first_error = std::sync::Mutex::new(None);
    let work = || loop {
        use std::sync::atomic::Ordering::Relaxed;
        let i = next.fetch_add(1, Relaxed);
        let Some(r) = records.get(i) else { break };
        match fixture_utterance(root, r, cfg) {
            Ok(n) => {
                segments.fetch_add(n, Relaxed);
            }
            Err(e) => {
                first_error.lock().expect("error slot").get_or_insert(e);
                break;
            }
        }
    };
    std::thread::scope(|s| {
        for _ in 1..cfg.jobs.max(1) {
            s.spawn(work);
        }
        work();
    });
    if let Some(e) = first_error.into_inner().expect("error slot") {
        return Err(e);
    }
    Ok(FixtureSummary {
        root: root.to_path_buf(),
        utterances: records.len(),
        segments: segments.into_inner(),
    })
}

fn fixture_utterance(root: &Path, r: &LabelRecord, cfg: &FixtureConfig) -> Result<usize> {
    let seed = cfg.seed ^ rng::key(&r.id);
    let wave = synthesize_waveform(r.label, cfg.duration_s, cfg.sample_rate_hz, cfg.snr, seed)?;
    let mut video = if cfg.video {
        Some(SyntheticVideo::new(r.label, r.region()?, cfg.duration_s, seed))
    } else {
        None
    };
    if let Some(raw) = &cfg.raw_dir {
        write_wav(&raw.join(AUDIO_DIR).join(format!("{}.wav", r.id)), &wave)?;
        if let Some(v) = video.as_mut() {
            let frames = (0..v.frames).map(|i| v.render(i)).collect::<Vec<_>>();
            write_emv(&raw.join(VIDEO_DIR).join(format!("{}.emv", r.id)), FIXTURE_FPS, &frames)?;
        }
    }
    let (written, skipped) = preprocess_utterance(
        root,
        r,
        &wave,
        video.as_mut().map(|v| v as &mut dyn FrameSource),
        &cfg.preprocess,
    )?;
    Ok(written + skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::stft;

    fn peak_hz(w: &Waveform) -> f64 {
        let frames = stft(w.samples(), 4096, 2048);
        let bins = frames.bins();
        let mut power = vec![0.0; bins];
        for f in 0..frames.len() {
            for (b, p) in power.iter_mut().enumerate() {
                *p += frames.frames[f][b].norm_sqr();
            }
        }
        let best = (1..bins).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap();
        best as f64 * w.sample_rate_hz() as f64 / 4096.0
    }

    #[test]
    fn tones_stay_in_their_band() {
        for e in ClassMode::Four.classes() {
            let w = synthesize_waveform(*e, 1.0, 16_000, 50.0, 3).unwrap();
            let (lo, hi) = fixture_band_hz(*e);
            let p = peak_hz(&w);
            assert!(p > lo - 10.0 && p < hi + 10.0, "{e}: {p}");
        }
    }

    #[test]
    fn noise_follows_snr() {
        let clean = synthesize_waveform(Emotion::Sad, 1.0, 16_000, 1e9, 4).unwrap();
        let noisy = synthesize_waveform(Emotion::Sad, 1.0, 16_000, 2.0, 4).unwrap();
        let ratio = noisy.rms().powi(2) / clean.rms().powi(2);
        assert!((ratio - 1.5).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn blob_moves_only_on_the_labeled_side() {
        let region = CropRegion::with_default_box(Side::Right);
        let mut v = SyntheticVideo::new(Emotion::Neutral, region, 2.0, 1);
        let a = v.frame(0).unwrap();
        let b = v.frame(7).unwrap();
        // brightness-weighted row centroid of one half
        let centroid = |img: &Image, x0: usize, x1: usize| -> f64 {
            let (mut m, mut s) = (0.0, 0.0);
            for y in 0..FIXTURE_FRAME_HEIGHT {
                for x in x0..x1 {
                    let v = (img.at(y, x, 0) as f64 - 0.5).max(0.0);
                    m += v * y as f64;
                    s += v;
                }
            }
            m / s
        };
        let half = FIXTURE_FRAME_WIDTH / 2;
        let moved = (centroid(&a, half, FIXTURE_FRAME_WIDTH) - centroid(&b, half, FIXTURE_FRAME_WIDTH)).abs();
        let still = (centroid(&a, 0, half) - centroid(&b, 0, half)).abs();
        assert!(moved > 5.0 && still < 1.0, "{moved} {still}");
        assert!(v.frame(v.frame_count()).is_err());
    }
}
