//! Audio front end: waveform loading, denoising, fixed-length segmenting and
//! rendering of fixed-scale spectrogram images.

mod denoise;
mod segment;
mod spectrogram;
mod stft;
mod wav;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use denoise::{bandpass, denoise, spectral_gate};
pub use segment::{clip_segments, noise_floor_rms, pad_to_duration};
pub use spectrogram::{
    crop_frequency_top, denormalize_image, normalize_image, render_spectrogram, SpectrogramMeta,
    Spectrogram, CHANNEL_MEAN, CHANNEL_STD, SPEC_CHANNELS, SPEC_HEIGHT, SPEC_WIDTH,
};
pub use stft::{hann, istft, stft, StftFrames};
pub use wav::{load_waveform, resample, write_wav};

pub const CANONICAL_RATE_HZ: u32 = 44_100;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("waveform has no samples".into()));
        }
        if sample_rate_hz == 0 {
            return Err(Error::Precondition("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Precondition(format!("non-finite sample at index {i}")));
        }
        Ok(Waveform {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }
}

pub(crate) fn rms(x: &[f32]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// One of the four dataset segmentations: full utterance or 3 s clips, each
/// with or without noise cleanup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentSpec {
    #[serde(rename = "DS1")]
    Ds1,
    #[serde(rename = "DS2")]
    Ds2,
    #[serde(rename = "DS3")]
    Ds3,
    #[serde(rename = "DS4")]
    Ds4,
}

impl SegmentSpec {
    pub const ALL: [SegmentSpec; 4] = [Self::Ds1, Self::Ds2, Self::Ds3, Self::Ds4];

    pub fn from_flags(noise_cleanup: bool, clip_3s: bool) -> Self {
        match (noise_cleanup, clip_3s) {
            (false, false) => Self::Ds1,
            (false, true) => Self::Ds2,
            (true, false) => Self::Ds3,
            (true, true) => Self::Ds4,
        }
    }

    pub fn noise_cleanup(self) -> bool {
        matches!(self, Self::Ds3 | Self::Ds4)
    }

    pub fn clip_3s(self) -> bool {
        matches!(self, Self::Ds2 | Self::Ds4)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ds1 => "DS I",
            Self::Ds2 => "DS II",
            Self::Ds3 => "DS III",
            Self::Ds4 => "DS IV",
        }
    }
}

impl std::str::FromStr for SegmentSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_uppercase();
        match key.as_str() {
            "DS1" | "DSI" => Ok(Self::Ds1),
            "DS2" | "DSII" => Ok(Self::Ds2),
            "DS3" | "DSIII" => Ok(Self::Ds3),
            "DS4" | "DSIV" => Ok(Self::Ds4),
            _ => Err(Error::Config(format!("unknown segment spec {s:?}"))),
        }
    }
}

impl std::fmt::Display for SegmentSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Tunables for the whole audio front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    pub sample_rate_hz: u32,
    pub n_fft: usize,
    pub hop: usize,
    /// dB window mapped onto [0, 1]; relative to a full-scale magnitude of 1.0.
    pub floor_db: f64,
    pub ceil_db: f64,
    pub bandpass_low_hz: f64,
    pub bandpass_high_hz: f64,
    /// Fraction of quietest STFT frames used to estimate the noise floor.
    pub gate_quiet_fraction: f64,
    pub gate_threshold_db: f64,
    pub gate_attenuation: f64,
    /// Fraction of quietest frames whose RMS sets the padding-noise level.
    pub pad_quiet_fraction: f64,
    pub segment_s: f64,
    /// Top fraction of rows removed by the frequency crop; 0 disables it.
    pub freq_crop: f64,
}

impl Default for DspConfig {
    fn default() -> Self {
        DspConfig {
            sample_rate_hz: CANONICAL_RATE_HZ,
            n_fft: 2048,
            hop: 512,
            floor_db: -60.0,
            ceil_db: 60.0,
            bandpass_low_hz: 1.0,
            bandpass_high_hz: 30_000.0,
            gate_quiet_fraction: 0.1,
            gate_threshold_db: 6.0,
            gate_attenuation: 0.1,
            pad_quiet_fraction: 0.1,
            segment_s: 3.0,
            freq_crop: 0.6,
        }
    }
}

impl DspConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("signal: {m}")));
        if self.sample_rate_hz == 0 {
            return bad("sample_rate_hz must be positive");
        }
        if self.n_fft < 2 || self.hop == 0 || self.hop > self.n_fft {
            return bad("need n_fft >= 2 and 0 < hop <= n_fft");
        }
        if self.floor_db >= self.ceil_db {
            return bad("floor_db must be below ceil_db");
        }
        if !(0.0..1.0).contains(&self.freq_crop) {
            return bad("freq_crop must be in [0, 1)");
        }
        if self.segment_s <= 0.0 {
            return bad("segment_s must be positive");
        }
        if !(self.gate_quiet_fraction > 0.0 && self.gate_quiet_fraction <= 1.0)
            || !(self.pad_quiet_fraction > 0.0 && self.pad_quiet_fraction <= 1.0)
        {
            return bad("quiet fractions must be in (0, 1]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_names_follow_flags() {
        assert_eq!(SegmentSpec::from_flags(false, false).name(), "DS I");
        assert_eq!(SegmentSpec::from_flags(false, true).name(), "DS II");
        assert_eq!(SegmentSpec::from_flags(true, false).name(), "DS III");
        assert_eq!(SegmentSpec::from_flags(true, true).name(), "DS IV");
        for s in SegmentSpec::ALL {
            assert_eq!(SegmentSpec::from_flags(s.noise_cleanup(), s.clip_3s()), s);
            assert_eq!(s.name().parse::<SegmentSpec>().unwrap(), s);
        }
        assert_eq!("ds2".parse::<SegmentSpec>().unwrap(), SegmentSpec::Ds2);
    }

    #[test]
    fn waveform_invariants() {
        assert!(matches!(Waveform::new(vec![], 44100), Err(Error::EmptyInput(_))));
        assert!(Waveform::new(vec![0.0], 0).is_err());
        assert!(Waveform::new(vec![0.0, f32::NAN], 44100).is_err());
        let w = Waveform::new(vec![0.5; 44100], 44100).unwrap();
        assert_eq!(w.duration_s(), 1.0);
    }
}
