use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::stft::{istft, stft};
use super::{DspConfig, Waveform};
use crate::error::{Error, Result};

/// Zero-phase band-pass: zeroes every DFT bin of the whole signal outside
/// `[low_hz, high_hz]`. `high_hz` is clamped to 0.999 x Nyquist.
pub fn bandpass(w: &Waveform, low_hz: f64, high_hz: f64) -> Result<Waveform> {
    let nyquist = w.sample_rate_hz() as f64 / 2.0;
    let high = high_hz.min(0.999 * nyquist);
    if !(low_hz >= 0.0 && low_hz < high) {
        return Err(Error::Precondition(format!(
            "band-pass needs 0 <= low < high, got low={low_hz} high={high_hz} (effective high {high})"
        )));
    }
    let n = w.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = w
        .samples()
        .iter()
        .map(|&s| Complex64::new(s as f64, 0.0))
        .collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let df = w.sample_rate_hz() as f64 / n as f64;
    for (k, b) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * df;
        if f < low_hz || f > high {
            *b = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    Waveform::new(
        buf.iter().map(|c| (c.re / n as f64) as f32).collect(),
        w.sample_rate_hz(),
    )
}

/// Spectral gate. The per-bin noise floor is the RMS magnitude over the
/// quietest `cfg.gate_quiet_fraction` of frames; bins below
/// floor + `cfg.gate_threshold_db` are multiplied by `cfg.gate_attenuation`.
pub fn spectral_gate(w: &Waveform, cfg: &DspConfig) -> Result<Waveform> {
    let (n_fft, hop) = (cfg.n_fft, cfg.hop);
    if w.len() < n_fft {
        return Err(Error::TooShort {
            needed: n_fft,
            got: w.len(),
        });
    }
    // pad so every original sample is covered by a full set of overlapping frames
    let pad = n_fft.div_ceil(hop) * hop;
    let mut padded = vec![0.0f32; pad];
    padded.extend_from_slice(w.samples());
    let tail = pad + (hop - (w.len() + pad) % hop) % hop;
    padded.extend(std::iter::repeat_n(0.0, tail));
    let mut spec = stft(&padded, n_fft, hop);

    // frames lying entirely inside the original signal
    let interior: Vec<usize> = (0..spec.len())
        .filter(|&t| t * hop >= pad && t * hop + n_fft <= pad + w.len())
        .collect();
    let mut energies: Vec<(f64, usize)> = interior
        .iter()
        .map(|&t| (spec.frames[t].iter().map(|c| c.norm_sqr()).sum::<f64>(), t))
        .collect();
    energies.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let quiet = ((energies.len() as f64 * cfg.gate_quiet_fraction).ceil() as usize)
        .clamp(1, energies.len());

    let bins = spec.bins();
    let mut floor = vec![0.0f64; bins];
    for &(_, t) in &energies[..quiet] {
        for (f, c) in floor.iter_mut().zip(&spec.frames[t]) {
            *f += c.norm_sqr();
        }
    }
    let gain = 10f64.powf(cfg.gate_threshold_db / 20.0);
    let threshold: Vec<f64> = floor
        .iter()
        .map(|&p| (p / quiet as f64).sqrt() * gain)
        .collect();
    let masks: Vec<Vec<bool>> = interior
        .iter()
        .map(|&t| {
            spec.frames[t]
                .iter()
                .zip(&threshold)
                .map(|(c, &th)| c.norm() < th)
                .collect()
        })
        .collect();
    // frames overlapping the padding borrow the mask of the nearest interior frame
    let (first, last) = (interior[0], interior[interior.len() - 1]);
    for (t, frame) in spec.frames.iter_mut().enumerate() {
        let mask = &masks[t.clamp(first, last) - first];
        for (c, &gated) in frame.iter_mut().zip(mask) {
            if gated {
                *c *= cfg.gate_attenuation;
            }
        }
    }
    let out = istft(&spec, padded.len());
    Waveform::new(out[pad..pad + w.len()].to_vec(), w.sample_rate_hz())
}

/// Band-pass followed by spectral gating; output has the input's length and rate.
pub fn denoise(w: &Waveform, low_hz: f64, high_hz: f64, cfg: &DspConfig) -> Result<Waveform> {
    if w.len() < cfg.n_fft {
        return Err(Error::TooShort {
            needed: cfg.n_fft,
            got: w.len(),
        });
    }
    let filtered = bandpass(w, low_hz, high_hz)?;
    spectral_gate(&filtered, cfg)
}
