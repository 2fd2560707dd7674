//! Fixture builders and paths shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use evc_core::curve::{resample, CurveConfig, EventCurve};
use evc_core::features::FeatureSequence;
use evc_core::flow::{Architecture, TrainConfig};

pub const STEP_FRAMES: usize = 100;
pub const STEP_AT: usize = 50;
pub const STEP_RATE_HZ: f64 = 10.0;
pub const STEP_DURATION_S: f64 = 10.0;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// `STEP_AT` frames of one vector followed by frames of another.
pub fn step_features() -> FeatureSequence {
    let v1 = [1.0, 0.0, 0.5, 0.25];
    let v2 = [0.125, 1.0, -0.375, 0.75];
    let frames: Vec<Vec<f64>> = (0..STEP_FRAMES)
        .map(|i| if i < STEP_AT { v1.to_vec() } else { v2.to_vec() })
        .collect();
    FeatureSequence::from_frames(&frames, STEP_RATE_HZ, "step-fixture").unwrap()
}

pub fn flat_features() -> FeatureSequence {
    let frames = vec![vec![0.5, -0.25, 2.0]; 40];
    FeatureSequence::from_frames(&frames, 25.0, "flat-fixture").unwrap()
}

/// The resampled position of the one non-zero dissimilarity of the step
/// fixture, as a fractional output index.
pub fn mapped_step_index(target_length: usize) -> f64 {
    let n = STEP_FRAMES - 1;
    (STEP_AT - 1) as f64 * (target_length - 1) as f64 / (n - 1) as f64
}

/// Cross-check of the mapping: resample an indicator of the step pair.
pub fn mapped_step_by_resampling(target_length: usize) -> usize {
    let mut a = vec![0.0; STEP_FRAMES - 1];
    a[STEP_AT - 1] = 1.0;
    let r = resample(&a, target_length).unwrap();
    r.iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1).then(y.0.cmp(&x.0)))
        .unwrap()
        .0
}

pub fn default_curve_config() -> CurveConfig {
    CurveConfig::default()
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn curve(values: Vec<f64>, duration: f64) -> EventCurve {
    EventCurve::new(values, duration).unwrap()
}

/// Dataset and training settings of the reference swap run.
pub const SWAP_DATA_SEED: u64 = 1;
pub const SWAP_DATA_ITEMS: usize = 4096;
pub const SWAP_TRAIN_SEED: u64 = 7;
pub const SWAP_CURVE_SEED: u64 = 99;
pub const SWAP_SAMPLE_SEED: u64 = 3;
pub const SWAP_CFG_SCALE: f64 = 2.0;

pub fn swap_train_config() -> TrainConfig {
    let text = std::fs::read_to_string(fixture("swap_train.json")).unwrap();
    let mut cfg = TrainConfig::from_json(&text).unwrap();
    cfg.seed = SWAP_TRAIN_SEED;
    cfg
}

pub fn small_arch() -> Architecture {
    Architecture {
        channels: 3,
        length: 8,
        hidden: [16, 12],
        time_dim: 4,
        class_dim: 4,
        class_count: 3,
    }
}
