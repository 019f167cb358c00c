//! Self-contained SVG line and step plots.
//!
//! Output depends only on the [`PlotSpec`]: no timestamps, ids or
//! hash-ordered containers, so the same spec always renders to the same
//! bytes.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Right-continuous steps: the value at `x_i` holds on `[x_i, x_{i+1})`.
    #[default]
    Step,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    pub color: String,
    pub width: f64,
    /// SVG `stroke-dasharray`, solid when absent.
    pub dash: Option<String>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

impl Stroke {
    /// Palette colour `i`, dashed on the second pass through the palette.
    pub fn nth(i: usize) -> Stroke {
        Stroke {
            color: PALETTE[i % PALETTE.len()].to_string(),
            width: 1.8,
            dash: (i / PALETTE.len() % 2 == 1).then(|| "6 3".to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotCurve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub stroke: Stroke,
    pub interpolation: Interpolation,
}

impl PlotCurve {
    pub fn step(label: impl Into<String>, points: Vec<(f64, f64)>, stroke: Stroke) -> Self {
        PlotCurve {
            label: label.into(),
            points,
            stroke,
            interpolation: Interpolation::Step,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub label: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub curves: Vec<PlotCurve>,
    pub x: Axis,
    pub y: Axis,
}

impl PlotSpec {
    /// Builds a spec whose axes span every point. The y axis always
    /// includes 0.
    pub fn fitted(title: &str, x_label: &str, y_label: &str, curves: Vec<PlotCurve>) -> Result<Self> {
        let all = || curves.iter().flat_map(|c| c.points.iter());
        if all().next().is_none() {
            return Err(Error::InvalidInput("nothing to plot".into()));
        }
        let fold = |f: fn(&(f64, f64)) -> f64| {
            all().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let (x0, x1) = fold(|p| p.0);
        let (y0, y1) = fold(|p| p.1);
        let widen = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let (x0, x1) = widen(x0, x1);
        let (y0, y1) = widen(y0.min(0.0), y1);
        let spec = PlotSpec {
            title: title.to_string(),
            curves,
            x: Axis { label: x_label.to_string(), min: x0, max: x1 },
            y: Axis { label: y_label.to_string(), min: y0, max: y1 },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.curves.is_empty() {
            return Err(Error::InvalidInput("plot has no curves".into()));
        }
        for axis in [&self.x, &self.y] {
            if !(axis.min < axis.max) || !axis.min.is_finite() || !axis.max.is_finite() {
                return Err(Error::InvalidInput(format!("axis `{}` has an empty range", axis.label)));
            }
        }
        for c in &self.curves {
            if c.points.is_empty() {
                return Err(Error::InvalidInput(format!("curve `{}` has no points", c.label)));
            }
            if c.points.windows(2).any(|w| w[1].0 < w[0].0) {
                return Err(Error::InvalidInput(format!("curve `{}` is not sorted by x", c.label)));
            }
            let inside = |v: f64, a: &Axis| v.is_finite() && v >= a.min && v <= a.max;
            if c.points.iter().any(|&(x, y)| !inside(x, &self.x) || !inside(y, &self.y)) {
                return Err(Error::InvalidInput(format!("curve `{}` leaves the axis ranges", c.label)));
            }
        }
        Ok(())
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Round tick spacing giving roughly `target` intervals.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(axis: &Axis) -> Vec<f64> {
    let step = tick_step(axis.max - axis.min, 6.0);
    let first = (axis.min / step).ceil() as i64;
    let last = (axis.max / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64, axis: &Axis) -> String {
    let step = tick_step(axis.max - axis.min, 6.0);
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let s = format!("{v:.decimals$}");
    if s == "-0" { "0".into() } else { s }
}

pub fn emit_svg_stepplot(spec: &PlotSpec) -> Result<String> {
    spec.validate()?;
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - spec.x.min) / (spec.x.max - spec.x.min) * pw;
    let sy = |y: f64| TOP + (spec.y.max - y) / (spec.y.max - spec.y.min) * ph;

    let mut s = String::new();
    // Writing into a String cannot fail.
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&spec.title)
    );

    // Axes and ticks.
    let _ = writeln!(
        s,
        r#"<g stroke="black" stroke-width="1"><line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}"/></g>"#,
        TOP + ph,
        LEFT + pw,
        TOP + ph,
        TOP + ph
    );
    for t in ticks(&spec.x) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 19.0,
            tick_label(t, &spec.x)
        );
    }
    for t in ticks(&spec.y) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT - 5.0,
            LEFT + pw,
            LEFT - 8.0,
            y + 4.0,
            tick_label(t, &spec.y)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(&spec.x.label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&spec.y.label)
    );

    for c in &spec.curves {
        let mut d = String::new();
        let (x0, y0) = c.points[0];
        let _ = write!(d, "M{:.2},{:.2}", sx(x0), sy(y0));
        for &(x, y) in &c.points[1..] {
            match c.interpolation {
                Interpolation::Step => {
                    let _ = write!(d, " H{:.2} V{:.2}", sx(x), sy(y));
                }
                Interpolation::Linear => {
                    let _ = write!(d, " L{:.2},{:.2}", sx(x), sy(y));
                }
            }
        }
        let dash = c
            .stroke
            .dash
            .as_ref()
            .map(|p| format!(r#" stroke-dasharray="{}""#, escape(p)))
            .unwrap_or_default();
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="{:.2}"{dash}/>"#,
            escape(&c.stroke.color),
            c.stroke.width
        );
    }

    // Legend, top right.
    let longest = spec.curves.iter().map(|c| c.label.chars().count()).max().unwrap_or(0) as f64;
    let lw = 40.0 + 7.0 * longest;
    let lx = LEFT + pw - lw - 8.0;
    let ly = TOP + 8.0;
    let _ = writeln!(
        s,
        r##"<rect x="{lx:.2}" y="{ly:.2}" width="{lw:.2}" height="{:.2}" fill="white" stroke="#999999"/>"##,
        8.0 + 18.0 * spec.curves.len() as f64
    );
    for (i, c) in spec.curves.iter().enumerate() {
        let y = ly + 16.0 + 18.0 * i as f64;
        let dash = c
            .stroke
            .dash
            .as_ref()
            .map(|p| format!(r#" stroke-dasharray="{}""#, escape(p)))
            .unwrap_or_default();
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="{:.2}"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 6.0,
            y - 4.0,
            lx + 30.0,
            y - 4.0,
            escape(&c.stroke.color),
            c.stroke.width,
            lx + 36.0,
            y,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
