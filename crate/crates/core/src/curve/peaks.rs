use std::cmp::Ordering;

use super::{EventCurve, EventTimeline};
use crate::error::{Error, Result};

/// Picks local maxima at or above `threshold`, strongest first, dropping any
/// peak closer than `min_separation_s` to one already kept. Equal values are
/// visited in index order, so the earlier peak wins a tie.
///
/// A sample is a local maximum when it is strictly above its left neighbour
/// and not below its right neighbour; a plateau contributes its first sample.
pub fn pick_peaks(curve: &EventCurve, threshold: f64, min_separation_s: f64) -> Result<EventTimeline> {
    if !(min_separation_s >= 0.0) {
        return Err(Error::InvalidData(format!(
            "min separation must be non-negative, got {min_separation_s}"
        )));
    }
    let v = curve.values();
    let n = v.len();
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            let left_ok = i == 0 || v[i] > v[i - 1];
            let right_ok = i + 1 == n || v[i] >= v[i + 1];
            left_ok && right_ok && v[i] >= threshold
        })
        .collect();
    candidates.sort_by(|&a, &b| match v[b].total_cmp(&v[a]) {
        Ordering::Equal => a.cmp(&b),
        other => other,
    });

    let mut kept: Vec<usize> = Vec::new();
    for i in candidates {
        let t = curve.time_of(i);
        if kept
            .iter()
            .all(|&k| (curve.time_of(k) - t).abs() >= min_separation_s)
        {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    EventTimeline::new(
        kept.into_iter().map(|i| curve.time_of(i)).collect(),
        curve.duration_s(),
        "peaks",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(values: Vec<f64>, duration: f64) -> EventCurve {
        EventCurve::new(values, duration).unwrap()
    }

    #[test]
    fn zero_curve_has_no_peaks() {
        let t = pick_peaks(&curve(vec![0.0; 20], 4.0), 0.5, 0.0).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn single_impulse() {
        let mut v = vec![0.0; 11];
        v[3] = 1.0;
        let t = pick_peaks(&curve(v, 5.0), 0.5, 0.0).unwrap();
        assert_eq!(t.times(), &[3.0 / 10.0 * 5.0]);
    }

    #[test]
    fn tie_goes_to_the_earlier_peak() {
        // two equal peaks 0.2 s apart, separation 0.5 s
        let mut v = vec![0.0; 11];
        v[4] = 1.0;
        v[6] = 1.0;
        let c = curve(v, 1.0);
        let t = pick_peaks(&c, 0.5, 0.5).unwrap();
        assert_eq!(t.times(), &[c.time_of(4)]);
    }

    #[test]
    fn negative_separation_rejected() {
        assert!(pick_peaks(&curve(vec![0.0; 3], 1.0), 0.0, -1.0).is_err());
    }
}
