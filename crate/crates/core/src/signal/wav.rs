use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::Waveform;
use crate::error::{Error, Result};

/// Decodes a PCM WAV file to mono (channel mean) at `target_rate_hz`.
pub fn load_waveform(path: &Path, target_rate_hz: u32) -> Result<Waveform> {
    let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.len() == 0 {
        return Err(Error::EmptyInput(format!("{} is empty", path.display())));
    }
    let decode_err = |e: hound::Error| Error::Decode {
        what: path.display().to_string(),
        reason: e.to_string(),
    };
    let mut reader = hound::WavReader::open(path).map_err(decode_err)?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(decode_err)?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1i64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(decode_err)?
        }
    };
    if interleaved.len() < channels {
        return Err(Error::EmptyInput(format!("{} has no samples", path.display())));
    }
    let mono: Vec<f32> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f32>() / channels as f32)
        .collect();
    let w = Waveform::new(mono, spec.sample_rate)?;
    if spec.sample_rate == target_rate_hz {
        Ok(w)
    } else {
        resample(&w, target_rate_hz)
    }
}

/// Writes 16-bit mono PCM, clamping to [-1, 1].
pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate_hz(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let to_err = |e: hound::Error| Error::Decode {
        what: path.display().to_string(),
        reason: e.to_string(),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(to_err)?;
    for &s in w.samples() {
        writer
            .write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)
            .map_err(to_err)?;
    }
    writer.finalize().map_err(to_err)
}

/// Band-limited resampling by zero-padding or truncating the spectrum of the
/// whole signal (the signal is treated as periodic).
pub fn resample(w: &Waveform, target_rate_hz: u32) -> Result<Waveform> {
    if target_rate_hz == 0 {
        return Err(Error::Precondition("target rate must be positive".into()));
    }
    let n = w.len();
    let m = ((n as f64) * target_rate_hz as f64 / w.sample_rate_hz() as f64).round() as usize;
    if m == 0 {
        return Err(Error::EmptyInput("resampled signal would be empty".into()));
    }
    if m == n {
        return Waveform::new(w.samples().to_vec(), target_rate_hz);
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut spec: Vec<Complex64> = w
        .samples()
        .iter()
        .map(|&s| Complex64::new(s as f64, 0.0))
        .collect();
    planner.plan_fft_forward(n).process(&mut spec);

    let mut out = vec![Complex64::new(0.0, 0.0); m];
    let small = n.min(m);
    let half = (small - 1) / 2;
    out[0] = spec[0];
    for k in 1..=half {
        out[k] = spec[k];
        out[m - k] = spec[n - k];
    }
    if small % 2 == 0 {
        let k = small / 2;
        if m > n {
            // split the old Nyquist bin across the new +/- frequencies
            out[k] = spec[k] * 0.5;
            out[m - k] = spec[k] * 0.5;
        } else {
            out[k] = spec[k] + spec[n - k];
        }
    }
    planner.plan_fft_inverse(m).process(&mut out);
    let scale = 1.0 / n as f64;
    Waveform::new(out.iter().map(|c| (c.re * scale) as f32).collect(), target_rate_hz)
}
