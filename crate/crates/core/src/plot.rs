//! Deterministic SVG rendering of event curves and event markers.

use std::fmt::Write as _;

use crate::curve::{EventCurve, EventTimeline};
use crate::error::{Error, Result};

pub const WIDTH: f64 = 960.0;
pub const HEIGHT: f64 = 320.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 16.0;
const BOTTOM: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Largest "nice" step (1, 2 or 5 times a power of ten) giving at most
/// `max_ticks` intervals over `span`.
fn tick_step(span: f64, max_ticks: usize) -> f64 {
    let raw = span / max_ticks as f64;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let s = format!("{v:.decimals$}");
    if s == "-0" { "0".into() } else { s }
}

/// Renders every curve as a polyline (classes `curve-0`, `curve-1`, ...)
/// over a shared time axis, plus a vertical marker per event.
pub fn render_svg(curves: &[EventCurve], events: Option<&EventTimeline>) -> Result<String> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InvalidData("nothing to plot".into()))?;
    let duration = first.duration_s();
    if let Some(c) = curves.iter().find(|c| (c.duration_s() - duration).abs() > 1e-9 * duration) {
        return Err(Error::Shape(format!(
            "curves span {duration} s and {} s; plots need a shared duration",
            c.duration_s()
        )));
    }
    let (mut lo, mut hi) = curves
        .iter()
        .flat_map(|c| c.values())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |t: f64| LEFT + t / duration * pw;
    let sy = |v: f64| TOP + (hi - v) / (hi - lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">"#
    );
    s.push_str("<style>.axis{stroke:#333;stroke-width:1}.tick{font:11px sans-serif;fill:#333}.event{stroke:#888;stroke-width:1;stroke-dasharray:4 3}polyline{fill:none;stroke-width:1.5}</style>\n");
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);

    // axes
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(s, r#"<line class="axis" x1="{x0:.2}" y1="{y1:.2}" x2="{x1:.2}" y2="{y1:.2}"/>"#);
    let _ = writeln!(s, r#"<line class="axis" x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/>"#);
    let tstep = tick_step(duration, 10);
    let mut k = 0;
    loop {
        let t = k as f64 * tstep;
        if t > duration * (1.0 + 1e-9) {
            break;
        }
        let x = sx(t);
        let _ = writeln!(s, r#"<line class="axis" x1="{x:.2}" y1="{y1:.2}" x2="{x:.2}" y2="{:.2}"/>"#, y1 + 4.0);
        let _ = writeln!(
            s,
            r#"<text class="tick" x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y1 + 17.0,
            fmt_tick(t, tstep)
        );
        k += 1;
    }
    let vstep = tick_step(hi - lo, 5);
    let mut v = (lo / vstep).ceil() * vstep;
    while v <= hi {
        let y = sy(v);
        let _ = writeln!(s, r#"<line class="axis" x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}"/>"#, x0 - 4.0);
        let _ = writeln!(
            s,
            r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 7.0,
            y + 4.0,
            fmt_tick(v, vstep)
        );
        v += vstep;
    }
    let _ = writeln!(
        s,
        r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="middle">time (s)</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 8.0
    );

    if let Some(ev) = events {
        for &t in ev.times().iter().filter(|t| **t <= duration) {
            let x = sx(t);
            let _ = writeln!(s, r#"<line class="event" x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}"/>"#);
        }
    }

    for (i, c) in curves.iter().enumerate() {
        let pts: Vec<String> = c
            .values()
            .iter()
            .enumerate()
            .map(|(j, &v)| format!("{:.2},{:.2}", sx(c.time_of(j)), sy(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="curve-{i}" stroke="{}" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
