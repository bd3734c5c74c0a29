//! Minimal static SVG charts for the report.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 300.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 56.0;
const TOP: f64 = 28.0;
const BOTTOM: f64 = 44.0;

pub const BLUE: &str = "#1f77b4";
pub const RED: &str = "#d62728";
pub const GREY: &str = "#7f7f7f";

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Line,
    Step,
    Dashed,
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
    pub color: &'a str,
    pub style: Style,
}

#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn over(values: impl Iterator<Item = f64>) -> Axis {
        let (lo, hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            Axis { lo: 0.0, hi: 1.0 }
        } else if hi > lo {
            Axis { lo, hi }
        } else {
            Axis { lo: lo - 0.5, hi: hi + 0.5 }
        }
    }

    fn scale(&self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..=4).map(|i| self.lo + (self.hi - self.lo) * i as f64 / 4.0).collect()
    }
}

fn tick_label(v: f64, span: f64) -> String {
    if span >= 20.0 {
        format!("{v:.0}")
    } else if span >= 2.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(out, r#"<text x="{}" y="16" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(title));
    let _ = write!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="{GREY}"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (LEFT + W - RIGHT) / 2.0, H - 8.0, escape(x_label));
    let _ = write!(
        out,
        r#"<text transform="translate(14,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        escape(y_label)
    );
}

fn x_ticks(out: &mut String, x: Axis) {
    for t in x.ticks() {
        let px = x.scale(t, LEFT, W - RIGHT);
        let _ = write!(
            out,
            r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            H - BOTTOM + 14.0,
            tick_label(t, x.hi - x.lo)
        );
    }
}

fn y_ticks(out: &mut String, y: Axis, right: bool) {
    for t in y.ticks() {
        let py = y.scale(t, H - BOTTOM, TOP);
        let (px, anchor) = if right { (W - RIGHT + 4.0, "start") } else { (LEFT - 4.0, "end") };
        let _ = write!(
            out,
            r#"<text x="{px}" y="{:.2}" text-anchor="{anchor}">{}</text>"#,
            py + 3.5,
            tick_label(t, y.hi - y.lo)
        );
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str, style: Style) {
    let mut path = String::new();
    for (i, &(px, py)) in pts.iter().enumerate() {
        if style == Style::Step && i > 0 {
            let _ = write!(path, "{px:.2},{:.2} ", pts[i - 1].1);
        }
        let _ = write!(path, "{px:.2},{py:.2} ");
    }
    let dash = if style == Style::Dashed { r#" stroke-dasharray="4 3""# } else { "" };
    let _ = write!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
        path.trim_end()
    );
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    for (i, (name, color)) in entries.iter().enumerate() {
        let y = TOP + 12.0 + 14.0 * i as f64;
        let _ = write!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="3" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            LEFT + 8.0,
            y - 4.0,
            LEFT + 22.0,
            y,
            escape(name)
        );
    }
}

/// Line chart of one or more series on shared axes; `unit` pins both axes
/// to [0, 1].
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>], unit: bool) -> String {
    let (x, y) = if unit {
        (Axis { lo: 0.0, hi: 1.0 }, Axis { lo: 0.0, hi: 1.0 })
    } else {
        (
            Axis::over(series.iter().flat_map(|s| s.points.iter().map(|p| p.0))),
            Axis::over(series.iter().flat_map(|s| s.points.iter().map(|p| p.1))),
        )
    };
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label);
    x_ticks(&mut out, x);
    y_ticks(&mut out, y, false);
    for s in series {
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .map(|&(a, b)| (x.scale(a, LEFT, W - RIGHT), y.scale(b, H - BOTTOM, TOP)))
            .collect();
        polyline(&mut out, &pts, s.color, s.style);
    }
    let entries: Vec<(&str, &str)> = series.iter().map(|s| (s.name, s.color)).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>");
    out
}

/// Bars on the left axis with a line on the right axis, one category per bin.
pub fn bar_line_chart(title: &str, labels: &[String], bars: (&str, &[f64]), line: (&str, &[f64])) -> String {
    let n = labels.len().max(1) as f64;
    let yb = Axis { lo: 0.0, hi: bars.1.iter().copied().fold(0.0, f64::max).max(1e-9) };
    let yl = Axis { lo: 0.0, hi: line.1.iter().copied().fold(0.0, f64::max).max(1e-9) };
    let slot = (W - LEFT - RIGHT) / n;
    let mut out = String::new();
    frame(&mut out, title, "bin", bars.0);
    y_ticks(&mut out, yb, false);
    y_ticks(&mut out, yl, true);
    let mut pts = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let top = yb.scale(bars.1[i], H - BOTTOM, TOP);
        let _ = write!(
            out,
            r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{BLUE}" fill-opacity="0.6"/>"#,
            cx - slot * 0.35,
            slot * 0.7,
            H - BOTTOM - top
        );
        let _ = write!(
            out,
            r#"<text x="{cx:.2}" y="{}" text-anchor="middle" font-size="9">{}</text>"#,
            H - BOTTOM + 14.0,
            escape(label)
        );
        pts.push((cx, yl.scale(line.1[i], H - BOTTOM, TOP)));
    }
    polyline(&mut out, &pts, RED, Style::Line);
    for (px, py) in &pts {
        let _ = write!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="{RED}"/>"#);
    }
    legend(&mut out, &[(bars.0, BLUE), (line.0, RED)]);
    out.push_str("</svg>");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed() {
        let s = Series {
            name: "a<b",
            points: vec![(0.0, 0.0), (0.5, 0.7), (1.0, 1.0)],
            color: BLUE,
            style: Style::Step,
        };
        let svg = line_chart("roc", "fpr", "tpr", &[s], true);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>"));
        assert!(svg.contains("a&lt;b"));
        let labels = vec!["[-Inf,8)".to_string(), "[8,Inf)".to_string()];
        let svg = bar_line_chart("x", &labels, ("count_distr", &[0.4, 0.6]), ("badprob", &[0.2, 0.3]));
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn flat_series_get_a_nonzero_span() {
        let a = Axis::over([3.0, 3.0].into_iter());
        assert!(a.hi > a.lo);
    }
}
