use serde::Serialize;

use super::{EventCurve, EventTimeline};
use crate::error::{Error, Result};
use crate::stats;

/// Per-anchor Pearson correlations between two curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowedCorrelation {
    /// One entry per anchor, `None` where the anchor was skipped.
    pub per_anchor: Vec<Option<f64>>,
    pub skipped: Vec<usize>,
    pub mean: f64,
}

/// Pearson correlation of `a` and `b` restricted to a window of `window_s`
/// seconds centred on each anchor. Windows with fewer than 3 samples, or
/// where either curve is constant, are skipped.
pub fn windowed_correlation(
    a: &EventCurve,
    b: &EventCurve,
    anchors: &EventTimeline,
    window_s: f64,
) -> Result<WindowedCorrelation> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("curve lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.duration_s() != b.duration_s() {
        return Err(Error::Shape(format!(
            "curve durations differ: {} vs {}",
            a.duration_s(),
            b.duration_s()
        )));
    }
    if !(window_s > 0.0) {
        return Err(Error::InvalidData(format!("window must be positive, got {window_s}")));
    }
    let times = a.times();
    let half = window_s / 2.0;
    let mut per_anchor = Vec::with_capacity(anchors.len());
    let mut skipped = Vec::new();
    for (k, &t) in anchors.times().iter().enumerate() {
        let idx: Vec<usize> = times
            .iter()
            .enumerate()
            .filter(|(_, &s)| s >= t - half && s <= t + half)
            .map(|(i, _)| i)
            .collect();
        let r = if idx.len() < 3 {
            None
        } else {
            let wa: Vec<f64> = idx.iter().map(|&i| a.values()[i]).collect();
            let wb: Vec<f64> = idx.iter().map(|&i| b.values()[i]).collect();
            stats::pearson(&wa, &wb)
        };
        if r.is_none() {
            skipped.push(k);
        }
        per_anchor.push(r);
    }
    let valid: Vec<f64> = per_anchor.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(Error::NoValidWindows);
    }
    Ok(WindowedCorrelation {
        per_anchor,
        skipped,
        mean: stats::mean(&valid),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wavy(n: usize) -> EventCurve {
        let v = (0..n).map(|i| (i as f64 * 0.37).sin() + 0.1 * (i as f64 * 1.3).cos()).collect();
        EventCurve::new(v, 10.0).unwrap()
    }

    #[test]
    fn identical_curves_correlate_perfectly() {
        let a = wavy(101);
        let anchors = EventTimeline::new(vec![2.0, 5.0, 8.0], 10.0, "cuts").unwrap();
        let r = windowed_correlation(&a, &a, &anchors, 1.0).unwrap();
        assert!(r.per_anchor.iter().all(|x| (x.unwrap() - 1.0).abs() < 1e-12));
        assert!((r.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negated_curve_anticorrelates() {
        let a = wavy(101);
        let b = a.with_values(a.values().iter().map(|v| -v).collect()).unwrap();
        let anchors = EventTimeline::new(vec![2.0, 5.0], 10.0, "cuts").unwrap();
        let r = windowed_correlation(&a, &b, &anchors, 1.0).unwrap();
        assert!((r.mean + 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_windows_are_skipped() {
        let a = wavy(11);
        let anchors = EventTimeline::new(vec![5.0], 10.0, "cuts").unwrap();
        // sample spacing is 1 s, a 0.5 s window holds one sample
        assert!(matches!(
            windowed_correlation(&a, &a, &anchors, 0.5),
            Err(Error::NoValidWindows)
        ));
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let anchors = EventTimeline::new(vec![5.0], 10.0, "cuts").unwrap();
        assert!(matches!(
            windowed_correlation(&wavy(11), &wavy(12), &anchors, 1.0),
            Err(Error::Shape(_))
        ));
    }
}
