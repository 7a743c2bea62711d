use rand_distr::{Distribution, Normal};

use super::{rms, DspConfig, Waveform};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// RMS of the quietest `quiet_fraction` of non-overlapping `frame_len` frames
/// (the whole signal if it is shorter than one frame).
pub fn noise_floor_rms(x: &[f32], frame_len: usize, quiet_fraction: f64) -> f64 {
    if x.len() < frame_len || frame_len == 0 {
        return rms(x);
    }
    let mut powers: Vec<f64> = x
        .chunks_exact(frame_len)
        .map(|f| rms(f).powi(2))
        .collect();
    powers.sort_by(f64::total_cmp);
    let k = ((powers.len() as f64 * quiet_fraction).ceil() as usize).clamp(1, powers.len());
    (powers[..k].iter().sum::<f64>() / k as f64).sqrt()
}

fn append_noise(samples: &mut Vec<f32>, target_len: usize, noise_rms: f64, seed: u64, index: u64) {
    let mut rng = rng::stream(seed, Purpose::PadNoise, index);
    let normal = Normal::new(0.0, noise_rms.max(0.0)).expect("finite std");
    while samples.len() < target_len {
        samples.push(normal.sample(&mut rng) as f32);
    }
}

fn target_len(duration_s: f64, rate: u32) -> usize {
    (duration_s * rate as f64).round() as usize
}

/// Extends `w` to exactly `duration_s` with Gaussian noise at the level of the
/// input's own noise floor.
pub fn pad_to_duration(w: &Waveform, duration_s: f64, cfg: &DspConfig, seed: u64) -> Result<Waveform> {
    let target = target_len(duration_s, w.sample_rate_hz());
    if w.len() > target {
        return Err(Error::Precondition(format!(
            "waveform is {:.3} s, longer than the {duration_s} s pad target; clip it first",
            w.duration_s()
        )));
    }
    if w.len() == target {
        return Ok(w.clone());
    }
    let floor = noise_floor_rms(w.samples(), cfg.n_fft, cfg.pad_quiet_fraction);
    let mut samples = w.samples().to_vec();
    append_noise(&mut samples, target, floor, seed, 0);
    Waveform::new(samples, w.sample_rate_hz())
}

/// Cuts `w` into consecutive non-overlapping `duration_s` windows. The final
/// partial window is padded with noise at the noise floor of the whole input.
pub fn clip_segments(w: &Waveform, duration_s: f64, cfg: &DspConfig, seed: u64) -> Result<Vec<Waveform>> {
    let len = target_len(duration_s, w.sample_rate_hz());
    if len == 0 {
        return Err(Error::Precondition("segment duration rounds to zero samples".into()));
    }
    let floor = noise_floor_rms(w.samples(), cfg.n_fft, cfg.pad_quiet_fraction);
    w.samples()
        .chunks(len)
        .enumerate()
        .map(|(i, chunk)| {
            let mut samples = chunk.to_vec();
            if samples.len() < len {
                append_noise(&mut samples, len, floor, seed, i as u64);
            }
            Waveform::new(samples, w.sample_rate_hz())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    const RATE: u32 = 44_100;

    fn noisy_tone(secs: f64, seed: u64) -> Waveform {
        let n = target_len(secs, RATE);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.01).unwrap();
        Waveform::new(
            (0..n)
                .map(|i| {
                    let t = i as f64 / RATE as f64;
                    // tone bursts with silent gaps so the floor is well defined
                    let gate = if (t * 2.0).fract() < 0.5 { 0.4 } else { 0.0 };
                    (gate * (std::f64::consts::TAU * 300.0 * t).sin() + noise.sample(&mut rng)) as f32
                })
                .collect(),
            RATE,
        )
        .unwrap()
    }

    #[test]
    fn pads_two_seconds_to_three() {
        let w = noisy_tone(2.0, 1);
        let out = pad_to_duration(&w, 3.0, &DspConfig::default(), 9).unwrap();
        assert_eq!(out.len(), 132_300);
        assert_eq!(&out.samples()[..w.len()], w.samples());
    }

    #[test]
    fn exact_length_is_identity() {
        let w = noisy_tone(3.0, 2);
        assert_eq!(pad_to_duration(&w, 3.0, &DspConfig::default(), 9).unwrap(), w);
    }

    #[test]
    fn too_long_is_rejected() {
        let w = noisy_tone(3.5, 3);
        assert!(matches!(
            pad_to_duration(&w, 3.0, &DspConfig::default(), 9),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn padded_tail_matches_noise_floor() {
        let w = noisy_tone(1.2, 4);
        let cfg = DspConfig::default();
        // oracle: quietest 10% of 2048-sample frames, computed directly
        let mut frame_power: Vec<f64> = w
            .samples()
            .chunks_exact(2048)
            .map(|f| f.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / 2048.0)
            .collect();
        frame_power.sort_by(f64::total_cmp);
        let k = (frame_power.len() as f64 * 0.1).ceil() as usize;
        let floor = (frame_power[..k].iter().sum::<f64>() / k as f64).sqrt();

        let out = pad_to_duration(&w, 3.0, &cfg, 5).unwrap();
        let tail_rms = rms(&out.samples()[w.len()..]);
        assert!(
            (tail_rms / floor - 1.0).abs() <= 0.2,
            "tail rms {tail_rms} vs floor {floor}"
        );
    }

    #[test]
    fn clip_counts_and_coverage() {
        let cfg = DspConfig::default();
        let w = noisy_tone(7.5, 6);
        let clips = clip_segments(&w, 3.0, &cfg, 1).unwrap();
        assert_eq!(clips.len(), 3);
        assert!(clips.iter().all(|c| c.len() == 132_300));
        let mut joined: Vec<f32> = clips.iter().flat_map(|c| c.samples().to_vec()).collect();
        joined.truncate(w.len());
        assert_eq!(joined, w.samples());

        let exact = noisy_tone(3.0, 7);
        let one = clip_segments(&exact, 3.0, &cfg, 1).unwrap();
        assert_eq!(one, vec![exact]);

        let short = noisy_tone(0.5, 8);
        let padded = clip_segments(&short, 3.0, &cfg, 1).unwrap();
        assert_eq!(padded.len(), 1);
        assert_eq!(&padded[0].samples()[..short.len()], short.samples());
        assert_eq!(padded[0].len(), 132_300);
    }

    #[test]
    fn padding_is_seeded() {
        let cfg = DspConfig::default();
        let w = noisy_tone(1.0, 9);
        let a = pad_to_duration(&w, 3.0, &cfg, 42).unwrap();
        let b = pad_to_duration(&w, 3.0, &cfg, 42).unwrap();
        let c = pad_to_duration(&w, 3.0, &cfg, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
