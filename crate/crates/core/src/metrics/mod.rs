//! Synchronization metrics over event timelines and curve distributions.

mod fd;
mod gaussian;
mod sync;

pub use fd::{curve_fd, CurveFd, FdMode};
pub use gaussian::{
    conditional_gaussian, fit_gaussian, fit_rows, frechet_distance, ConditionalGaussian, GaussianStats,
    COVARIANCE_REGULARIZATION,
};
pub use sync::{
    beat_scores, match_beats, scene_cut_hit, tempo_bpm, temporal_deviation, BeatScores, DEFAULT_BEAT_TOLERANCE_S,
    DEFAULT_SCH_TOLERANCE_S,
};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// `{"metric", "value", "params", "items"}` as written by every metric command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    pub params: Map<String, Value>,
    pub items: Vec<Option<f64>>,
}

impl MetricReport {
    pub fn new(metric: impl Into<String>, value: f64) -> Self {
        Self {
            metric: metric.into(),
            value,
            params: Map::new(),
            items: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn items(mut self, items: impl IntoIterator<Item = Option<f64>>) -> Self {
        self.items = items.into_iter().collect();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
