//! Standalone log-log plots of sweeps: `log10(-p)` against `log10(value)`.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 48.0;
const BOTTOM: f64 = 64.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

/// One curve in data coordinates `(-p, value, stderr)`.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64, f64)>,
    pub style: Style,
}

/// Straight line of the given slope in log-log space through `anchor`.
#[derive(Debug, Clone)]
pub struct Reference {
    pub label: String,
    pub slope: f64,
    pub anchor: (f64, f64),
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if (hi - lo).abs() < 1e-9 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Integer ticks, or half-decade ticks when the range is short.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = if hi - lo < 2.0 { 0.5 } else { ((hi - lo) / 8.0).ceil().max(1.0) };
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-12 {
        out.push(t);
        t += step;
    }
    out
}

pub fn loglog(title: &str, series: &[Series], reference: Option<&Reference>, notes: &[String]) -> String {
    let logs: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y, _)| *x > 0.0 && *y > 0.0)
        .map(|(x, y, _)| (x.log10(), y.log10()))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &logs {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if logs.is_empty() {
        (x0, x1, y0, y1) = (-1.0, 0.0, -1.0, 0.0);
    }
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);
    let frame = Frame { x0, x1, y0, y1 };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (left, right, top, bottom) = (frame.px(x0), frame.px(x1), frame.py(y1), frame.py(y0));
    let _ = writeln!(
        svg,
        r#"<rect x="{left:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    for t in ticks(x0, x1) {
        let x = frame.px(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{bottom:.1}" x2="{x:.1}" y2="{top:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{t}</text>"##,
            bottom + 16.0
        );
    }
    for t in ticks(y0, y1) {
        let y = frame.py(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{left:.1}" y1="{y:.1}" x2="{right:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{t}</text>"##,
            left - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">log10(-p)</text>"#,
        (left + right) / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">log10(variance)</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0
    );

    if let Some(r) = reference {
        let (ax, ay) = (r.anchor.0.log10(), r.anchor.1.log10());
        let at = |x: f64| ay + r.slope * (x - ax);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-dasharray="6 4" clip-path="url(#frame)"/>"#,
            frame.px(x0),
            frame.py(at(x0)),
            frame.px(x1),
            frame.py(at(x1))
        );
    }
    let _ = writeln!(
        svg,
        r#"<defs><clipPath id="frame"><rect x="{left:.1}" y="{top:.1}" width="{:.1}" height="{:.1}"/></clipPath></defs>"#,
        right - left,
        bottom - top
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64, f64)> = s.points.iter().copied().filter(|(x, y, _)| *x > 0.0 && *y > 0.0).collect();
        match s.style {
            Style::Line => {
                let path: Vec<String> = pts
                    .iter()
                    .map(|(x, y, _)| format!("{:.1},{:.1}", frame.px(x.log10()), frame.py(y.log10())))
                    .collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                    path.join(" ")
                );
            }
            Style::Markers => {
                for (x, y, e) in &pts {
                    let (cx, cy) = (frame.px(x.log10()), frame.py(y.log10()));
                    if *e > 0.0 && *e < *y {
                        let _ = writeln!(
                            svg,
                            r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="{color}"/>"#,
                            frame.py((y + e).log10()),
                            frame.py((y - e).log10())
                        );
                    }
                    let _ = writeln!(
                        svg,
                        r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="3.5" fill="none" stroke="{color}" stroke-width="1.5"/>"#
                    );
                }
            }
        }
    }

    let mut legend: Vec<(String, String)> = series
        .iter()
        .enumerate()
        .map(|(i, s)| (PALETTE[i % PALETTE.len()].to_string(), s.label.clone()))
        .collect();
    if let Some(r) = reference {
        legend.push(("black".into(), r.label.clone()));
    }
    let mut y = top + 18.0;
    for (color, label) in &legend {
        let _ = writeln!(
            svg,
            r#"<rect x="{:.1}" y="{:.1}" width="12" height="4" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            right - 250.0,
            y - 6.0,
            right - 232.0,
            y,
            escape(label)
        );
        y += 16.0;
    }
    for note in notes {
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{y:.1}" class="note">{}</text>"#, right - 250.0, escape(note));
        y += 16.0;
    }
    svg.push_str("</svg>\n");
    svg
}
