//! Event-timing metrics: scene cut hit, beat coverage/hit and tempo deviation.

use log::warn;
use serde::Serialize;

use crate::curve::EventTimeline;
use crate::error::{Error, Result};
use crate::stats;

pub const DEFAULT_SCH_TOLERANCE_S: f64 = 0.1;
pub const DEFAULT_BEAT_TOLERANCE_S: f64 = 0.2;

#[inline]
fn within(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn check_tolerance(tol: f64) -> Result<()> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be non-negative, got {tol}")));
    }
    Ok(())
}

/// Fraction of cuts with at least one onset within `tolerance_s` (inclusive).
///
/// Both timelines are sorted, so a single pointer into `onsets` walks past
/// onsets that are too early for the current cut and never needs to back up.
pub fn scene_cut_hit(cuts: &EventTimeline, onsets: &EventTimeline, tolerance_s: f64) -> Result<f64> {
    check_tolerance(tolerance_s)?;
    if cuts.is_empty() {
        return Err(Error::NoCuts);
    }
    let onsets = onsets.times();
    let mut j = 0;
    let mut hits = 0usize;
    for &cut in cuts.times() {
        while j < onsets.len() && cut - onsets[j] > tolerance_s {
            j += 1;
        }
        if j < onsets.len() && within(onsets[j], cut, tolerance_s) {
            hits += 1;
        }
    }
    Ok(hits as f64 / cuts.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeatScores {
    /// Recall over motion beats.
    pub bcs: f64,
    /// Precision over music beats.
    pub bhs: f64,
    pub f1: f64,
    pub matched_count: usize,
}

/// One-to-one matching between motion and music beats.
///
/// Motion beats are visited in time order and each takes the earliest
/// unmatched music beat within `tolerance_s`. With sorted timelines and a
/// common tolerance this yields a maximum matching, so the count does not
/// depend on which timeline plays the motion role.
pub fn match_beats(motion: &EventTimeline, music: &EventTimeline, tolerance_s: f64) -> Result<usize> {
    check_tolerance(tolerance_s)?;
    let music = music.times();
    let mut j = 0;
    let mut matched = 0;
    for &m in motion.times() {
        while j < music.len() && m - music[j] > tolerance_s {
            j += 1;
        }
        if j < music.len() && within(m, music[j], tolerance_s) {
            matched += 1;
            j += 1;
        }
    }
    Ok(matched)
}

pub fn beat_scores(motion: &EventTimeline, music: &EventTimeline, tolerance_s: f64) -> Result<BeatScores> {
    let matched = match_beats(motion, music, tolerance_s)?;
    if motion.is_empty() {
        warn!("motion timeline is empty, BCS is 0");
    }
    if music.is_empty() {
        warn!("music timeline is empty, BHS is 0");
    }
    let ratio = |n: usize| if n == 0 { 0.0 } else { matched as f64 / n as f64 };
    let bcs = ratio(motion.len());
    let bhs = ratio(music.len());
    let f1 = if bcs + bhs == 0.0 {
        0.0
    } else {
        2.0 * bcs * bhs / (bcs + bhs)
    };
    Ok(BeatScores {
        bcs,
        bhs,
        f1,
        matched_count: matched,
    })
}

/// `60 / median inter-event interval`, in BPM.
pub fn tempo_bpm(timeline: &EventTimeline) -> Result<f64> {
    if timeline.len() < 2 {
        return Err(Error::InsufficientBeats(format!(
            "tempo needs at least 2 events in '{}', got {}",
            timeline.label,
            timeline.len()
        )));
    }
    let intervals: Vec<f64> = timeline.times().windows(2).map(|w| w[1] - w[0]).collect();
    Ok(60.0 / stats::median(&intervals))
}

/// Absolute tempo difference in BPM.
pub fn temporal_deviation(motion: &EventTimeline, music: &EventTimeline) -> Result<f64> {
    Ok((tempo_bpm(music)? - tempo_bpm(motion)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tl(times: &[f64]) -> EventTimeline {
        EventTimeline::from_unsorted(times.to_vec(), 0.0, "t").unwrap()
    }

    #[test]
    fn sch_hand_fixture() {
        assert_eq!(scene_cut_hit(&tl(&[1.0, 2.0]), &tl(&[1.05, 3.0]), 0.1).unwrap(), 0.5);
    }

    #[test]
    fn sch_boundary_and_empty() {
        assert_eq!(scene_cut_hit(&tl(&[1.0]), &tl(&[1.0]), 0.1).unwrap(), 1.0);
        assert_eq!(scene_cut_hit(&tl(&[1.0]), &tl(&[1.5]), 0.5).unwrap(), 1.0);
        assert_eq!(scene_cut_hit(&tl(&[1.0, 2.0]), &tl(&[]), 0.1).unwrap(), 0.0);
        assert!(matches!(scene_cut_hit(&tl(&[]), &tl(&[1.0]), 0.1), Err(Error::NoCuts)));
    }

    #[test]
    fn one_onset_serves_several_cuts() {
        assert_eq!(scene_cut_hit(&tl(&[1.0, 1.1]), &tl(&[1.05]), 0.1).unwrap(), 1.0);
    }

    #[test]
    fn beat_examples() {
        let s = beat_scores(&tl(&[1.0, 2.0, 3.0]), &tl(&[1.0, 2.0, 3.0]), 0.2).unwrap();
        assert_eq!((s.bcs, s.bhs, s.f1), (1.0, 1.0, 1.0));
        let s = beat_scores(&tl(&[1.0, 2.0, 3.0]), &tl(&[10.0, 20.0]), 0.2).unwrap();
        assert_eq!((s.bcs, s.bhs, s.f1), (0.0, 0.0, 0.0));
        let s = beat_scores(&tl(&[1.0, 2.0]), &tl(&[1.1, 5.0]), 0.2).unwrap();
        assert_eq!((s.bcs, s.bhs, s.f1, s.matched_count), (0.5, 0.5, 0.5, 1));
    }

    #[test]
    fn beat_matching_is_one_to_one() {
        let s = beat_scores(&tl(&[1.0, 1.1, 1.2]), &tl(&[1.1]), 0.2).unwrap();
        assert_eq!(s.matched_count, 1);
        assert!((s.bcs - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.bhs, 1.0);
    }

    #[test]
    fn earliest_fit_beats_nearest_fit() {
        // closest pair first would spend 1.15 on 1.2 and strand 1.0
        let s = beat_scores(&tl(&[1.0, 1.2]), &tl(&[1.15, 1.35]), 0.2).unwrap();
        assert_eq!(s.matched_count, 2);
    }

    #[test]
    fn empty_timelines_score_zero() {
        let s = beat_scores(&tl(&[]), &tl(&[1.0]), 0.2).unwrap();
        assert_eq!((s.bcs, s.bhs, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn td_examples() {
        let motion = tl(&[0.0, 0.5, 1.0, 1.5, 2.0]);
        let music = tl(&[0.0, 0.6, 1.2, 1.8]);
        assert!((temporal_deviation(&motion, &music).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(temporal_deviation(&motion, &motion).unwrap(), 0.0);
        assert!(matches!(
            temporal_deviation(&tl(&[1.0]), &music),
            Err(Error::InsufficientBeats(_))
        ));
    }
}
