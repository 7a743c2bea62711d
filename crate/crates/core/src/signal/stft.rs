use std::f64::consts::TAU;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos())
        .collect()
}

/// One-sided STFT: `frames[t][k]` for bins `k` in `0..=n_fft/2`.
#[derive(Debug, Clone)]
pub struct StftFrames {
    pub n_fft: usize,
    pub hop: usize,
    pub frames: Vec<Vec<Complex64>>,
}

impl StftFrames {
    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Hann-windowed frames starting at `0, hop, 2*hop, ...`; only whole frames are kept.
pub fn stft(x: &[f32], n_fft: usize, hop: usize) -> StftFrames {
    let count = if x.len() < n_fft {
        0
    } else {
        1 + (x.len() - n_fft) / hop
    };
    let window = hann(n_fft);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut frames = Vec::with_capacity(count);
    let mut buf = vec![Complex64::default(); n_fft];
    for t in 0..count {
        let start = t * hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(x[start + i] as f64 * window[i], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        frames.push(buf[..=n_fft / 2].to_vec());
    }
    StftFrames { n_fft, hop, frames }
}

/// Weighted overlap-add inverse of [`stft`] (synthesis window = analysis window,
/// normalized by the summed squared window). Samples no frame covers come back as 0.
pub fn istft(spec: &StftFrames, len: usize) -> Vec<f32> {
    let n_fft = spec.n_fft;
    let window = hann(n_fft);
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n_fft);
    let mut scratch = vec![Complex64::default(); ifft.get_inplace_scratch_len()];
    let mut acc = vec![0.0f64; len];
    let mut norm = vec![0.0f64; len];
    let mut buf = vec![Complex64::default(); n_fft];
    for (t, frame) in spec.frames.iter().enumerate() {
        buf[..frame.len()].copy_from_slice(frame);
        for k in 1..n_fft - frame.len() + 1 {
            buf[n_fft - k] = frame[k].conj();
        }
        ifft.process_with_scratch(&mut buf, &mut scratch);
        let start = t * spec.hop;
        for i in 0..n_fft {
            let j = start + i;
            if j >= len {
                break;
            }
            acc[j] += buf[i].re / n_fft as f64 * window[i];
            norm[j] += window[i] * window[i];
        }
    }
    acc.iter()
        .zip(&norm)
        .map(|(&a, &w)| if w > 1e-10 { (a / w) as f32 } else { 0.0 })
        .collect()
}
