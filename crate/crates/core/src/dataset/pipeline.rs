//! Shared per-utterance preprocessing and tensor loading.
//!
//! Raw corpus layout consumed by [`preprocess_corpus`]:
//!
//! ```text
//! raw/labels.jsonl        same records as the dataset root's labels.jsonl
//! raw/audio/<uttId>.wav   PCM audio, any rate, mono or stereo
//! raw/video/<uttId>.emv   optional raw video (see `vision::video`)
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{
    apply_augmentation, read_labels, segment_stem, write_labels, DatasetMeta, Example, LabelRecord,
    AUDIO_DIR, CLIP_EXT, DATASET_VERSION, LABELS_FILE, SPEC_EXT, VIDEO_DIR,
};
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::models::Input;
use crate::npy;
use crate::rng;
use crate::signal::{
    clip_segments, crop_frequency_top, denoise, load_waveform, render_spectrogram, DspConfig,
    SegmentSpec, SpectrogramMeta, Waveform, CHANNEL_MEAN, CHANNEL_STD, SPEC_CHANNELS,
    SPEC_HEIGHT, SPEC_WIDTH,
};
use crate::tensor::{Scalar, Tensor};
use crate::vision::{build_clip, EmvReader, FrameSource, CLIP_FRAMES, CLIP_HEIGHT, CLIP_WIDTH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub segment: SegmentSpec,
    pub dsp: DspConfig,
    pub seed: u64,
    /// Rewrite outputs that already exist.
    pub force: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            segment: SegmentSpec::Ds2,
            dsp: DspConfig::default(),
            seed: 0,
            force: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreprocessSummary {
    pub utterances: usize,
    /// Segments written.
    pub written: usize,
    /// Segments left in place because their outputs existed.
    pub skipped: usize,
    /// `(utterance id, error)` for every utterance that failed.
    pub failed: Vec<(String, String)>,
}

#[derive(Serialize)]
struct SpecSidecar<'a> {
    #[serde(flatten)]
    meta: &'a SpectrogramMeta,
    duration_s: f64,
    seed: u64,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Runs one utterance through the front end and writes its segments under
/// `root`: optional denoising, optional 3 s clipping, spectrogram rendering
/// with the configured frequency crop, and (with a video) one head-crop clip
/// per segment window. Returns `(written, skipped)` segment counts.
pub fn preprocess_utterance(
    root: &Path,
    record: &LabelRecord,
    waveform: &Waveform,
    video: Option<&mut dyn FrameSource>,
    cfg: &PreprocessConfig,
) -> Result<(usize, usize)> {
    let dsp = &cfg.dsp;
    let seg_len = (dsp.segment_s * waveform.sample_rate_hz() as f64).round() as usize;
    let n_segments = if cfg.segment.clip_3s() {
        waveform.len().div_ceil(seg_len.max(1))
    } else {
        1
    };
    let audio_dir = root.join(AUDIO_DIR);
    let video_dir = root.join(VIDEO_DIR);
    let spec_path = |i| audio_dir.join(format!("{}.{SPEC_EXT}", segment_stem(&record.id, i)));
    let clip_path = |i| video_dir.join(format!("{}.{CLIP_EXT}", segment_stem(&record.id, i)));
    let with_video = video.is_some();
    let complete = (0..n_segments)
        .all(|i| spec_path(i).is_file() && (!with_video || clip_path(i).is_file()));
    if complete && !cfg.force {
        return Ok((0, n_segments));
    }
    create_dir(&audio_dir)?;

    let seed = cfg.seed ^ rng::key(&record.id);
    let cleaned = if cfg.segment.noise_cleanup() {
        denoise(waveform, dsp.bandpass_low_hz, dsp.bandpass_high_hz, dsp)?
    } else {
        waveform.clone()
    };
    let segments = if cfg.segment.clip_3s() {
        clip_segments(&cleaned, dsp.segment_s, dsp, seed)?
    } else {
        vec![cleaned]
    };
    debug_assert_eq!(segments.len(), n_segments);

    let mut video = video;
    let region = if with_video {
        create_dir(&video_dir)?;
        Some(record.region()?)
    } else {
        None
    };
    for (i, seg) in segments.iter().enumerate() {
        let offset_s = if cfg.segment.clip_3s() {
            i as f64 * dsp.segment_s
        } else {
            0.0
        };
        let meta = SpectrogramMeta {
            source_id: record.id.clone(),
            segment: cfg.segment,
            offset_s,
        };
        let mut spec = render_spectrogram(seg, dsp, meta)?;
        if dsp.freq_crop > 0.0 {
            spec = crop_frequency_top(&spec, dsp.freq_crop)?;
        }
        let path = spec_path(i);
        spec.save_npy(&path)?;
        write_json(
            &path.with_extension("json"),
            &SpecSidecar {
                meta: &spec.meta,
                duration_s: seg.duration_s(),
                seed,
            },
        )?;
        if let (Some(v), Some(region)) = (video.as_deref_mut(), region.as_ref()) {
            let window = if cfg.segment.clip_3s() {
                dsp.segment_s
            } else {
                waveform.duration_s()
            };
            let clip = build_clip(v, &record.id, offset_s, window, region)?;
            let path = clip_path(i);
            clip.save(&path)?;
            write_json(&path.with_extension("json"), &clip.meta)?;
        }
    }
    Ok((segments.len(), 0))
}

/// Preprocesses every utterance of a raw corpus (layout in the module docs)
/// into `out`, using up to `jobs` worker threads. Per-utterance failures are
/// collected in the summary rather than aborting the run.
pub fn preprocess_corpus(
    raw: &Path,
    out: &Path,
    cfg: &PreprocessConfig,
    jobs: usize,
) -> Result<PreprocessSummary> {
    cfg.dsp.validate()?;
    let labels_path = raw.join(LABELS_FILE);
    if !labels_path.is_file() {
        return Err(Error::Io {
            path: labels_path,
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "missing label index"),
        });
    }
    let records = read_labels(&labels_path)?;
    create_dir(out)?;
    write_labels(&out.join(LABELS_FILE), &records)?;
    DatasetMeta {
        version: DATASET_VERSION,
        segment: cfg.segment,
        seed: cfg.seed,
        generator: "preprocess".into(),
    }
    .save(out)?;

    let next = AtomicUsize::new(0);
    let summary = Mutex::new(PreprocessSummary {
        utterances: records.len(),
        ..Default::default()
    });
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(record) = records.get(i) else { break };
        let result = preprocess_raw(raw, out, record, cfg);
        let mut s = summary.lock().expect("summary lock");
        match result {
            Ok((w, k)) => {
                s.written += w;
                s.skipped += k;
            }
            Err(e) => {
                log::error!("{}: {e}", record.id);
                s.failed.push((record.id.clone(), e.to_string()));
            }
        }
    };
    std::thread::scope(|scope| {
        for _ in 1..jobs.max(1) {
            scope.spawn(work);
        }
        work();
    });
    let mut summary = summary.into_inner().expect("summary lock");
    summary.failed.sort();
    Ok(summary)
}

fn preprocess_raw(
    raw: &Path,
    out: &Path,
    record: &LabelRecord,
    cfg: &PreprocessConfig,
) -> Result<(usize, usize)> {
    let wav: PathBuf = raw.join(AUDIO_DIR).join(format!("{}.wav", record.id));
    let waveform = load_waveform(&wav, cfg.dsp.sample_rate_hz)?;
    let emv = raw.join(VIDEO_DIR).join(format!("{}.emv", record.id));
    if emv.is_file() {
        let mut reader = EmvReader::open(&emv)?;
        preprocess_utterance(out, record, &waveform, Some(&mut reader), cfg)
    } else {
        preprocess_utterance(out, record, &waveform, None, cfg)
    }
}

/// HWC image in [0, 1] to a channel-normalized CHW tensor.
fn normalized_chw<T: Scalar>(img: &Image) -> Tensor<T> {
    let plane = img.height * img.width;
    let mut out = vec![T::zero(); 3 * plane];
    for (p, px) in img.data.chunks_exact(3).enumerate() {
        for c in 0..3 {
            out[c * plane + p] = T::of(((px[c] - CHANNEL_MEAN[c]) / CHANNEL_STD[c]) as f64);
        }
    }
    Tensor::from_vec(&[3, img.height, img.width], out).expect("shape matches")
}

/// The example's spectrogram with its augmentation applied, normalized, as
/// a `[3, 200, 300]` tensor.
pub fn spectrogram_tensor<T: Scalar>(root: &Path, e: &Example) -> Result<Tensor<T>> {
    let path = root.join(&e.spectrogram);
    let arr = npy::read(&path)?;
    if arr.shape != [SPEC_HEIGHT, SPEC_WIDTH, SPEC_CHANNELS] {
        return Err(Error::shape(
            format!("[{SPEC_HEIGHT}, {SPEC_WIDTH}, {SPEC_CHANNELS}]"),
            format!("{:?} in {}", arr.shape, path.display()),
        ));
    }
    let img = Image::from_data(SPEC_HEIGHT, SPEC_WIDTH, SPEC_CHANNELS, arr.into_f32())?;
    let img = apply_augmentation(&img, e.augmentation, e.rotation_deg);
    Ok(normalized_chw(&img))
}

/// The example's clip, normalized like the spectrograms, as `[3, 20, 100, 60]`.
pub fn clip_tensor<T: Scalar>(root: &Path, e: &Example) -> Result<Tensor<T>> {
    let rel = e
        .clip
        .as_ref()
        .ok_or_else(|| Error::Manifest(format!("example {} has no clip", e.id)))?;
    let path = root.join(rel);
    let arr = npy::read(&path)?;
    if arr.shape != [CLIP_FRAMES, CLIP_HEIGHT, CLIP_WIDTH, 3] {
        return Err(Error::shape(
            format!("[{CLIP_FRAMES}, {CLIP_HEIGHT}, {CLIP_WIDTH}, 3]"),
            format!("{:?} in {}", arr.shape, path.display()),
        ));
    }
    let data = arr.into_f32();
    let plane = CLIP_HEIGHT * CLIP_WIDTH;
    let mut out = vec![T::zero(); 3 * CLIP_FRAMES * plane];
    for (t, frame) in data.chunks_exact(plane * 3).enumerate() {
        for (p, px) in frame.chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[(c * CLIP_FRAMES + t) * plane + p] =
                    T::of(((px[c] - CHANNEL_MEAN[c]) / CHANNEL_STD[c]) as f64);
            }
        }
    }
    Tensor::from_vec(&[3, CLIP_FRAMES, CLIP_HEIGHT, CLIP_WIDTH], out)
}

pub fn load_input<T: Scalar>(root: &Path, e: &Example, with_clip: bool) -> Result<Input<T>> {
    Ok(Input {
        spec: spectrogram_tensor(root, e)?,
        clip: if with_clip {
            Some(clip_tensor(root, e)?)
        } else {
            None
        },
    })
}
