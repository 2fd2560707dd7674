//! Curve CSV and timeline JSON.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EventCurve, EventTimeline};
use crate::error::{Error, Result};
use crate::stats::format_significant;

const CSV_HEADER: &str = "time_s,value";

/// `time_s,value` rows, both with 9 significant digits.
pub fn curve_to_csv(curve: &EventCurve) -> String {
    let mut out = String::with_capacity(24 * (curve.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (i, v) in curve.values().iter().enumerate() {
        out.push_str(&format_significant(curve.time_of(i), 9));
        out.push(',');
        out.push_str(&format_significant(*v, 9));
        out.push('\n');
    }
    out
}

/// Parses a curve CSV. The duration is the time of the last row.
pub fn curve_from_csv(text: &str) -> Result<EventCurve> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        Some(h) => return Err(Error::Format(format!("expected header \"{CSV_HEADER}\", found \"{h}\""))),
        None => return Err(Error::Format("empty curve file".into())),
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, line) in lines.enumerate() {
        let (t, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Format(format!("row {}: expected two columns", row + 1)))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("row {}: {e}", row + 1)))
        };
        times.push(parse(t)?);
        values.push(parse(v)?);
    }
    if values.len() < 2 {
        return Err(Error::Shape(format!("curve file has {} rows, need at least 2", values.len())));
    }
    if times[0] != 0.0 {
        return Err(Error::InvalidData(format!("first time must be 0, found {}", times[0])));
    }
    EventCurve::new(values, *times.last().unwrap())
}

pub fn write_curve_csv(curve: &EventCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, curve_to_csv(curve)).map_err(|e| Error::io(path, e))
}

pub fn read_curve_csv(path: impl AsRef<Path>) -> Result<EventCurve> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    curve_from_csv(&text)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimelineJson {
    unit: String,
    span_s: f64,
    label: String,
    times: Vec<f64>,
}

impl Serialize for EventTimeline {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TimelineJson {
            unit: "seconds".into(),
            span_s: self.span_s,
            label: self.label.clone(),
            times: self.times_s.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for EventTimeline {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = TimelineJson::deserialize(d)?;
        if raw.unit != "seconds" {
            return Err(serde::de::Error::custom(format!(
                "unsupported unit \"{}\", expected \"seconds\"",
                raw.unit
            )));
        }
        EventTimeline::new(raw.times, raw.span_s, raw.label).map_err(serde::de::Error::custom)
    }
}

pub fn read_timeline(path: impl AsRef<Path>) -> Result<EventTimeline> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_timeline(timeline: &EventTimeline, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(timeline).expect("timeline serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let c = EventCurve::new(vec![0.5, -1.0 / 3.0, 2.0], 32.0).unwrap();
        assert_eq!(curve_to_csv(&c), "time_s,value\n0,0.5\n16,-0.333333333\n32,2\n");
        let back = curve_from_csv(&curve_to_csv(&c)).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back.duration_s(), 32.0);
    }

    #[test]
    fn empty_and_headerless_files_rejected() {
        assert!(matches!(curve_from_csv(""), Err(Error::Format(_))));
        assert!(matches!(curve_from_csv("a,b\n0,1\n"), Err(Error::Format(_))));
        assert!(matches!(curve_from_csv("time_s,value\n"), Err(Error::Shape(_))));
    }

    #[test]
    fn timeline_json_shape() {
        let t = EventTimeline::new(vec![1.0, 2.5], 4.0, "cuts").unwrap();
        let json = serde_json::to_value(&t).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"unit": "seconds", "span_s": 4.0, "label": "cuts", "times": [1.0, 2.5]})
        );
        let back: EventTimeline = serde_json::from_value(json).unwrap();
        assert_eq!(back, t);
        let bad = serde_json::json!({"unit": "ms", "span_s": 4.0, "label": "cuts", "times": []});
        assert!(serde_json::from_value::<EventTimeline>(bad).is_err());
    }
}
