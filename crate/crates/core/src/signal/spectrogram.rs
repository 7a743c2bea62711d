use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stft::stft;
use super::{DspConfig, SegmentSpec, Waveform};
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::npy;

pub const SPEC_HEIGHT: usize = 200;
pub const SPEC_WIDTH: usize = 300;
pub const SPEC_CHANNELS: usize = 3;

/// Per-channel statistics used to standardize image inputs.
pub const CHANNEL_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
pub const CHANNEL_STD: [f32; 3] = [0.229, 0.224, 0.225];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramMeta {
    pub source_id: String,
    pub segment: SegmentSpec,
    pub offset_s: f64,
}

/// A 200 x 300 x 3 time/frequency image: row 0 is the highest frequency,
/// column 0 the earliest frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    image: Image,
    pub meta: SpectrogramMeta,
}

impl Spectrogram {
    pub fn new(image: Image, meta: SpectrogramMeta) -> Result<Self> {
        if (image.height, image.width, image.channels) != (SPEC_HEIGHT, SPEC_WIDTH, SPEC_CHANNELS) {
            return Err(Error::shape(
                format!("{SPEC_HEIGHT}x{SPEC_WIDTH}x{SPEC_CHANNELS}"),
                format!("{}x{}x{}", image.height, image.width, image.channels),
            ));
        }
        if !image.data.iter().all(|v| v.is_finite()) {
            return Err(Error::Precondition("spectrogram has non-finite pixels".into()));
        }
        Ok(Spectrogram { image, meta })
    }

    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.image.height, self.image.width, self.image.channels)
    }

    pub fn at(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.image.at(row, col, channel)
    }

    pub fn save_npy(&self, path: &Path) -> Result<()> {
        npy::write_f32(path, &[SPEC_HEIGHT, SPEC_WIDTH, SPEC_CHANNELS], &self.image.data)
    }

    pub fn load_npy(path: &Path, meta: SpectrogramMeta) -> Result<Self> {
        let arr = npy::read(path)?;
        if arr.shape != [SPEC_HEIGHT, SPEC_WIDTH, SPEC_CHANNELS] {
            return Err(Error::shape(
                format!("[{SPEC_HEIGHT}, {SPEC_WIDTH}, {SPEC_CHANNELS}]"),
                format!("{:?} in {}", arr.shape, path.display()),
            ));
        }
        let image = Image::from_data(SPEC_HEIGHT, SPEC_WIDTH, SPEC_CHANNELS, arr.into_f32())?;
        Spectrogram::new(image, meta)
    }
}

/// Interpolation weights mapping `n_in` samples onto `n_out`: box (area)
/// averaging when shrinking, linear interpolation otherwise.
pub(crate) fn axis_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            if n_out < n_in {
                let (lo, hi) = (o as f64 * scale, (o + 1) as f64 * scale);
                let mut w = Vec::new();
                let mut i = lo.floor() as usize;
                while (i as f64) < hi && i < n_in {
                    let overlap = hi.min(i as f64 + 1.0) - lo.max(i as f64);
                    if overlap > 0.0 {
                        w.push((i, overlap / scale));
                    }
                    i += 1;
                }
                w
            } else {
                let x = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = x.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                let f = x - i0 as f64;
                if i1 == i0 || f == 0.0 {
                    vec![(i0, 1.0)]
                } else {
                    vec![(i0, 1.0 - f), (i1, f)]
                }
            }
        })
        .collect()
}

/// Renders a fixed-scale spectrogram: Hann STFT power, resampled to
/// 200 frequency rows x 300 time columns, converted to dB against a
/// full-scale magnitude of 1.0, clipped to `[floor_db, ceil_db]` and mapped
/// linearly onto [0, 1]. The three channels are identical.
pub fn render_spectrogram(w: &Waveform, cfg: &DspConfig, meta: SpectrogramMeta) -> Result<Spectrogram> {
    if w.sample_rate_hz() != cfg.sample_rate_hz {
        return Err(Error::Precondition(format!(
            "expected {} Hz audio, got {} Hz",
            cfg.sample_rate_hz,
            w.sample_rate_hz()
        )));
    }
    let spec = stft(w.samples(), cfg.n_fft, cfg.hop);
    if spec.is_empty() {
        return Err(Error::TooShort {
            needed: cfg.n_fft,
            got: w.len(),
        });
    }
    let bins = spec.bins();
    let freq_w = axis_weights(bins, SPEC_HEIGHT);
    let time_w = axis_weights(spec.len(), SPEC_WIDTH);

    // power per (frame, row), rows ascending in frequency
    let by_frame: Vec<Vec<f64>> = spec
        .frames
        .iter()
        .map(|frame| {
            freq_w
                .iter()
                .map(|ws| ws.iter().map(|&(k, a)| a * frame[k].norm_sqr()).sum())
                .collect()
        })
        .collect();

    let span = cfg.ceil_db - cfg.floor_db;
    let mut image = Image::new(SPEC_HEIGHT, SPEC_WIDTH, SPEC_CHANNELS);
    for (col, ws) in time_w.iter().enumerate() {
        for asc_row in 0..SPEC_HEIGHT {
            let power: f64 = ws.iter().map(|&(t, a)| a * by_frame[t][asc_row]).sum();
            let db = 10.0 * power.max(1e-30).log10();
            let v = ((db.clamp(cfg.floor_db, cfg.ceil_db) - cfg.floor_db) / span) as f32;
            let row = SPEC_HEIGHT - 1 - asc_row;
            for c in 0..SPEC_CHANNELS {
                image.set(row, col, c, v);
            }
        }
    }
    Spectrogram::new(image, meta)
}

/// Drops the top `fraction` of rows (highest frequencies) and stretches the
/// rest back to full height.
pub fn crop_frequency_top(s: &Spectrogram, fraction: f64) -> Result<Spectrogram> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Precondition(format!(
            "crop fraction must be in (0, 1), got {fraction}"
        )));
    }
    let h = SPEC_HEIGHT as f64;
    let image = s
        .image
        .crop_resize((fraction * h, 0.0, h, SPEC_WIDTH as f64), SPEC_HEIGHT, SPEC_WIDTH);
    Spectrogram::new(image, s.meta.clone())
}

pub fn normalize_image(s: &Spectrogram) -> Spectrogram {
    map_channels(s, |v, c| (v - CHANNEL_MEAN[c]) / CHANNEL_STD[c])
}

pub fn denormalize_image(s: &Spectrogram) -> Spectrogram {
    map_channels(s, |v, c| v * CHANNEL_STD[c] + CHANNEL_MEAN[c])
}

fn map_channels(s: &Spectrogram, f: impl Fn(f32, usize) -> f32) -> Spectrogram {
    let mut image = s.image.clone();
    for (i, v) in image.data.iter_mut().enumerate() {
        *v = f(*v, i % SPEC_CHANNELS);
    }
    Spectrogram {
        image,
        meta: s.meta.clone(),
    }
}
