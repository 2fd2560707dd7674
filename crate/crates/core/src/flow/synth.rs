//! Synthetic stand-ins for the music corpus and for video curves.
//!
//! Training latents carry the curve in their loudness: the RMS over channels
//! at every timestep is `ENVELOPE_OFFSET + ENVELOPE_GAIN * curve`. The class
//! only rotates the channel pattern, so it never changes the envelope.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Latent;
use crate::curve::{extract_event_curve, hann_smooth, standardize, CurveConfig, EventCurve};
use crate::error::{Error, Result};
use crate::features::FeatureSequence;

/// Nominal latent frame rate used to give synthetic curves a duration.
pub const SYNTH_FRAME_RATE_HZ: f64 = 12.3;
pub const ENVELOPE_OFFSET: f64 = 1.0;
pub const ENVELOPE_GAIN: f64 = 0.5;
const CURVE_KERNEL: usize = 9;
const MIXING_SEED: u64 = 0x6d69_7869_6e67;
const VIDEO_FPS: f64 = 10.0;
const VIDEO_FEATURE_DIM: usize = 32;
const MIN_SCENE_FRAMES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthItem {
    pub x0: Latent,
    pub curve: EventCurve,
    pub class_id: usize,
}

/// `n` training triples `(x0, curve, class)`, reproducible from `seed`.
pub fn synth_dataset(
    seed: u64,
    n: usize,
    channels: usize,
    length: usize,
    class_count: usize,
) -> Result<Vec<SynthItem>> {
    if n == 0 {
        return Err(Error::InvalidConfig("dataset must contain at least one item".into()));
    }
    if class_count == 0 {
        return Err(Error::InvalidConfig("need at least one class".into()));
    }
    check_length(length)?;
    let mixers: Vec<Vec<f64>> = (0..class_count).map(|c| mixing_matrix(channels, c)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let curve = sparse_impulse_curve(&mut rng, length)?;
            let class_id = rng.random_range(0..class_count);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let x0 = latent_with_mixer(curve.values(), &mixers[class_id], channels, sign)?;
            Ok(SynthItem { x0, curve, class_id })
        })
        .collect()
}

/// The latent whose per-timestep RMS is the affine envelope of `curve`.
pub fn synth_latent(curve: &[f64], class_id: usize, channels: usize, sign: f64) -> Result<Latent> {
    latent_with_mixer(curve, &mixing_matrix(channels, class_id), channels, sign)
}

fn check_length(length: usize) -> Result<()> {
    if length < CURVE_KERNEL.div_ceil(2) + 1 {
        return Err(Error::Shape(format!("latent length {length} too short for synthetic curves")));
    }
    Ok(())
}

/// 2 to 6 impulses, standardized, then Hann-smoothed with K = 9.
fn sparse_impulse_curve(rng: &mut ChaCha8Rng, length: usize) -> Result<EventCurve> {
    let count = rng.random_range(2..=6).min(length);
    let mut raw = vec![0.0; length];
    let mut placed = 0;
    while placed < count {
        let i = rng.random_range(0..length);
        if raw[i] == 0.0 {
            raw[i] = rng.random_range(0.5..1.0);
            placed += 1;
        }
    }
    let standardized = standardize(&raw)?;
    let smoothed = hann_smooth(&standardized.values, CURVE_KERNEL)?;
    let mut curve = EventCurve::new(smoothed, length as f64 / SYNTH_FRAME_RATE_HZ)?;
    curve.pipeline = Some(CurveConfig {
        target_length: length,
        kernel_size: CURVE_KERNEL,
    });
    curve.standardized = true;
    curve.degenerate = standardized.degenerate;
    Ok(curve)
}

fn latent_with_mixer(curve: &[f64], mixer: &[f64], channels: usize, sign: f64) -> Result<Latent> {
    let length = curve.len();
    let mut data = vec![0.0; channels * length];
    let mut pattern = vec![0.0; channels];
    for (j, &c) in curve.iter().enumerate() {
        unit_rms_pattern(j, length, &mut pattern);
        let env = ENVELOPE_OFFSET + ENVELOPE_GAIN * c;
        for row in 0..channels {
            let mixed: f64 = (0..channels).map(|k| mixer[row * channels + k] * pattern[k]).sum();
            data[row * length + j] = sign * env * mixed;
        }
    }
    Latent::new(channels, length, data)
}

/// A channel vector with RMS exactly 1 whose phase drifts along time.
fn unit_rms_pattern(j: usize, length: usize, out: &mut [f64]) {
    let d = out.len();
    if d < 3 {
        out.fill(1.0);
        return;
    }
    let phase = 2.0 * std::f64::consts::PI * 3.0 * j as f64 / length as f64;
    for (c, o) in out.iter_mut().enumerate() {
        *o = std::f64::consts::SQRT_2 * (2.0 * std::f64::consts::PI * c as f64 / d as f64 + phase).cos();
    }
}

/// Orthogonal `d x d` matrix (row-major) fixed per class.
fn mixing_matrix(d: usize, class_id: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(MIXING_SEED ^ class_id as u64);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    while rows.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        for r in &rows {
            let dot: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(r) {
                *a -= dot * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            rows.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    rows.concat()
}

/// Curves extracted from synthetic "video" features: 32-dim frames at
/// 10 fps, piecewise constant between 2 to 6 scene cuts, with per-frame
/// jitter. They go through the full curve pipeline, so they share nothing
/// with the training curves except the construction recipe.
pub fn synth_video_curves(seed: u64, n: usize, length: usize) -> Result<Vec<EventCurve>> {
    check_length(length)?;
    let duration = length as f64 / SYNTH_FRAME_RATE_HZ;
    let frames = (duration * VIDEO_FPS).round().max(4.0) as usize;
    let cfg = CurveConfig::new(length, CURVE_KERNEL)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let seq = video_features(&mut rng, frames)?;
            extract_event_curve(&seq, &cfg, duration)
        })
        .collect()
}

fn video_features(rng: &mut ChaCha8Rng, frames: usize) -> Result<FeatureSequence> {
    // cuts sit at least MIN_SCENE_FRAMES apart: draw from the shrunk range,
    // then spread back out
    let room = frames - 1;
    let fit = (room - 1) / MIN_SCENE_FRAMES + 1;
    let cuts = rng.random_range(2..=6).min(fit);
    let span = room - (cuts - 1) * (MIN_SCENE_FRAMES - 1);
    let mut boundaries: Vec<usize> = rand::seq::index::sample(rng, span, cuts).into_vec();
    boundaries.sort_unstable();
    for (i, b) in boundaries.iter_mut().enumerate() {
        *b += 1 + i * (MIN_SCENE_FRAMES - 1);
    }
    let mut scene: Vec<f64> = random_vector(rng, VIDEO_FEATURE_DIM, 1.0);
    let mut data = Vec::with_capacity(frames * VIDEO_FEATURE_DIM);
    for f in 0..frames {
        if boundaries.contains(&f) {
            scene = random_vector(rng, VIDEO_FEATURE_DIM, 1.0);
        }
        let jitter = random_vector(rng, VIDEO_FEATURE_DIM, 0.08);
        data.extend(scene.iter().zip(&jitter).map(|(s, j)| s + j));
    }
    FeatureSequence::new(VIDEO_FEATURE_DIM, VIDEO_FPS, data, "synthetic-video")
}

fn random_vector(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::rms_envelope;

    #[test]
    fn envelope_is_affine_in_curve() {
        let items = synth_dataset(7, 50, 8, 64, 4).unwrap();
        for item in &items {
            let env = rms_envelope(&item.x0);
            for (e, c) in env.iter().zip(item.curve.values()) {
                assert!((e - (ENVELOPE_OFFSET + ENVELOPE_GAIN * c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_curve_gives_constant_envelope() {
        let x0 = synth_latent(&[0.0; 16], 2, 8, 1.0).unwrap();
        let env = rms_envelope(&x0);
        assert!(env.iter().all(|e| (e - ENVELOPE_OFFSET).abs() < 1e-12));
        let x2 = synth_latent(&[0.0; 16], 1, 2, -1.0).unwrap();
        assert!(rms_envelope(&x2).iter().all(|e| (e - ENVELOPE_OFFSET).abs() < 1e-12));
    }

    #[test]
    fn regenerating_with_same_seed_is_identical() {
        assert_eq!(synth_dataset(3, 10, 8, 64, 4).unwrap(), synth_dataset(3, 10, 8, 64, 4).unwrap());
        assert_ne!(synth_dataset(3, 10, 8, 64, 4).unwrap(), synth_dataset(4, 10, 8, 64, 4).unwrap());
    }

    #[test]
    fn envelope_stays_positive() {
        for item in synth_dataset(11, 2000, 8, 64, 4).unwrap() {
            let min = item.curve.values().iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(ENVELOPE_OFFSET + ENVELOPE_GAIN * min > 0.0);
        }
    }

    #[test]
    fn mixing_is_orthogonal() {
        let m = mixing_matrix(8, 3);
        for i in 0..8 {
            for j in 0..8 {
                let dot: f64 = (0..8).map(|k| m[i * 8 + k] * m[j * 8 + k]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn short_video_curves_finish() {
        for length in [6, 8, 16, 40] {
            for seed in 0..50 {
                assert_eq!(synth_video_curves(seed, 2, length).unwrap().len(), 2);
            }
        }
    }

    #[test]
    fn video_curves_have_events() {
        let curves = synth_video_curves(5, 20, 64).unwrap();
        for c in &curves {
            assert_eq!(c.len(), 64);
            assert!(!c.degenerate);
            let max = c.values().iter().cloned().fold(f64::MIN, f64::max);
            // smoothed standardized curves keep roughly 0.4 std, with visible peaks
            assert!(crate::stats::population_std(c.values()) > 0.2);
            assert!(max > 0.5, "expected a clear peak, max {max}");
        }
    }
}
