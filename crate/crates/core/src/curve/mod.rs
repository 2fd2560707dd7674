//! Event curves: standardized, resampled and smoothed consecutive-frame
//! dissimilarity of a feature sequence.
//!
//! The same pipeline runs on music features and on video features, which is
//! what makes a curve from one modality a drop-in condition for a model
//! trained on the other.

mod correlate;
mod io;
mod ops;
mod peaks;

pub use correlate::{windowed_correlation, WindowedCorrelation};
pub use io::{read_curve_csv, read_timeline, write_curve_csv, write_timeline, curve_to_csv, curve_from_csv};
pub use ops::{
    consecutive_dissimilarity, hann_smooth, hann_window, resample, standardize, Standardized,
    DEGENERATE_STD,
};
pub use peaks::pick_peaks;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSequence;

/// Latent frames of a 32 s clip at 12.3 Hz.
pub const DEFAULT_TARGET_LENGTH: usize = 394;
pub const DEFAULT_KERNEL_SIZE: usize = 31;

/// Parameters of the curve pipeline. Resampling is always linear and flat
/// input always yields a zero curve with the degenerate flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveConfig {
    pub target_length: usize,
    pub kernel_size: usize,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            target_length: DEFAULT_TARGET_LENGTH,
            kernel_size: DEFAULT_KERNEL_SIZE,
        }
    }
}

impl CurveConfig {
    pub fn new(target_length: usize, kernel_size: usize) -> Result<Self> {
        let cfg = Self {
            target_length,
            kernel_size,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::InvalidKernel(format!(
                "kernel size must be odd and positive, got {}",
                self.kernel_size
            )));
        }
        if self.target_length < 2 {
            return Err(Error::Shape(format!(
                "target length must be at least 2, got {}",
                self.target_length
            )));
        }
        Ok(())
    }
}

/// A fixed-length event curve over a clip of `duration_s` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCurve {
    values: Vec<f64>,
    duration_s: f64,
    /// Pipeline that produced the curve, when known.
    pub pipeline: Option<CurveConfig>,
    pub standardized: bool,
    pub degenerate: bool,
}

impl EventCurve {
    /// Wraps raw values. No pipeline, not marked standardized.
    pub fn new(values: Vec<f64>, duration_s: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Shape(format!(
                "an event curve needs at least 2 samples, got {}",
                values.len()
            )));
        }
        if !(duration_s.is_finite() && duration_s > 0.0) {
            return Err(Error::InvalidData(format!("duration must be positive, got {duration_s}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("event curve contains non-finite values".into()));
        }
        Ok(Self {
            values,
            duration_s,
            pipeline: None,
            standardized: false,
            degenerate: false,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    /// Time in seconds of sample `index`.
    pub fn time_of(&self, index: usize) -> f64 {
        index as f64 / (self.len() - 1) as f64 * self.duration_s
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time_of(i)).collect()
    }

    /// Same metadata, different values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(values, self.duration_s)?;
        out.pipeline = self.pipeline;
        out.standardized = self.standardized;
        out.degenerate = self.degenerate;
        Ok(out)
    }
}

/// Dissimilarity, standardization, resampling and smoothing, in that order.
pub fn extract_event_curve(seq: &FeatureSequence, cfg: &CurveConfig, duration_s: f64) -> Result<EventCurve> {
    cfg.validate()?;
    let dissim = consecutive_dissimilarity(seq)?;
    let Standardized { values, degenerate } = standardize(&dissim)?;
    let resampled = resample(&values, cfg.target_length)?;
    let smoothed = hann_smooth(&resampled, cfg.kernel_size)?;
    let mut curve = EventCurve::new(smoothed, duration_s)?;
    curve.pipeline = Some(*cfg);
    curve.standardized = true;
    curve.degenerate = degenerate;
    Ok(curve)
}

/// Strictly increasing event times within `[0, span_s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTimeline {
    times_s: Vec<f64>,
    span_s: f64,
    pub label: String,
}

impl EventTimeline {
    pub fn new(times_s: Vec<f64>, span_s: f64, label: impl Into<String>) -> Result<Self> {
        if !(span_s.is_finite() && span_s >= 0.0) {
            return Err(Error::InvalidData(format!("span must be non-negative, got {span_s}")));
        }
        if let Some(bad) = times_s.iter().find(|t| !(t.is_finite() && **t >= 0.0 && **t <= span_s)) {
            return Err(Error::InvalidData(format!(
                "event time {bad} outside [0, {span_s}]"
            )));
        }
        if let Some(w) = times_s.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidData(format!(
                "event times must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self {
            times_s,
            span_s,
            label: label.into(),
        })
    }

    /// Sorts and deduplicates `times_s`, and widens the span to cover them.
    pub fn from_unsorted(mut times_s: Vec<f64>, span_s: f64, label: impl Into<String>) -> Result<Self> {
        times_s.sort_by(f64::total_cmp);
        times_s.dedup();
        let span = times_s.last().copied().unwrap_or(0.0).max(span_s);
        Self::new(times_s, span, label)
    }

    pub fn times(&self) -> &[f64] {
        &self.times_s
    }

    pub fn span_s(&self) -> f64 {
        self.span_s
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    /// Every time moved by `offset_s`; the span grows by the same amount.
    pub fn shifted(&self, offset_s: f64) -> Result<Self> {
        Self::new(
            self.times_s.iter().map(|t| t + offset_s).collect(),
            self.span_s + offset_s.max(0.0),
            self.label.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_features_give_degenerate_zero_curve() {
        let frames = vec![vec![0.3, -0.7, 1.1]; 50];
        let seq = FeatureSequence::from_frames(&frames, 25.0, "const").unwrap();
        let curve = extract_event_curve(&seq, &CurveConfig::default(), 32.0).unwrap();
        assert!(curve.degenerate);
        assert_eq!(curve.len(), DEFAULT_TARGET_LENGTH);
        assert!(curve.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn even_kernel_config_is_rejected() {
        assert!(matches!(CurveConfig::new(394, 30), Err(Error::InvalidKernel(_))));
        assert!(matches!(CurveConfig::new(1, 31), Err(Error::Shape(_))));
    }

    #[test]
    fn timeline_validation() {
        assert!(EventTimeline::new(vec![0.0, 1.0, 2.0], 2.0, "cuts").is_ok());
        assert!(EventTimeline::new(vec![1.0, 1.0], 2.0, "cuts").is_err());
        assert!(EventTimeline::new(vec![3.0], 2.0, "cuts").is_err());
        assert!(EventTimeline::new(vec![-0.1], 2.0, "cuts").is_err());
        let t = EventTimeline::from_unsorted(vec![2.0, 1.0, 2.0], 0.0, "x").unwrap();
        assert_eq!(t.times(), &[1.0, 2.0]);
        assert_eq!(t.span_s(), 2.0);
    }

    #[test]
    fn curve_time_grid() {
        let c = EventCurve::new(vec![0.0; 5], 2.0).unwrap();
        assert_eq!(c.times(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }
}
