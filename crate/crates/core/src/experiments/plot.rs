//! Minimal SVG scatter and box plots built from line, rect and circle
//! elements.

use std::fmt::Write;

use super::BoxStats;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let (x0, x1) = padded_range(xs);
        let (y0, y1) = padded_range(ys);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

fn header(title: &str, x_label: &str, y_label: &str, frame: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (bx, by) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<line x1="{bx}" y1="{by}" x2="{}" y2="{by}" stroke="black"/>"#, WIDTH - MARGIN);
    let _ = writeln!(s, r#"<line x1="{bx}" y1="{by}" x2="{bx}" y2="{MARGIN}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 16.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (v, anchor) in [(frame.x0, "start"), (frame.x1, "end")] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="{anchor}">{}</text>"#, frame.px(v), by + 16.0, tick(v));
    }
    for v in [frame.y0, frame.y1] {
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, MARGIN - 4.0, frame.py(v) + 4.0, tick(v));
    }
    s
}

fn tick(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter plot of `(x, y)` points.
pub fn scatter_svg(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let frame = Frame::new(points.iter().map(|p| p.0), points.iter().map(|p| p.1));
    let mut s = header(title, x_label, y_label, &frame);
    for &(x, y) in points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, frame.px(x), frame.py(y));
    }
    s.push_str("</svg>\n");
    s
}

/// One box per category, placed at equal spacing and labelled with the
/// category value.
pub fn box_svg(title: &str, x_label: &str, y_label: &str, boxes: &[(f64, BoxStats)]) -> String {
    let n = boxes.len().max(1) as f64;
    let frame = Frame::new(
        [0.0, n + 1.0].into_iter(),
        boxes.iter().flat_map(|(_, b)| [b.min, b.max]).collect::<Vec<_>>().into_iter(),
    );
    let mut s = header(title, x_label, y_label, &frame);
    let half = 0.3 * (frame.px(1.0) - frame.px(0.0));
    for (i, (label, b)) in boxes.iter().enumerate() {
        let cx = frame.px(i as f64 + 1.0);
        let (top, bottom) = (frame.py(b.q3), frame.py(b.q1));
        let _ = writeln!(s, r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#, frame.py(b.max), frame.py(b.min));
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="lightsteelblue" stroke="black"/>"#,
            cx - half,
            2.0 * half,
            (bottom - top).max(0.5)
        );
        let my = frame.py(b.median);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{my:.2}" x2="{:.2}" y2="{my:.2}" stroke="black" stroke-width="2"/>"#, cx - half, cx + half);
        let _ = writeln!(s, r#"<text x="{cx:.2}" y="{}" text-anchor="middle">{label}</text>"#, HEIGHT - MARGIN + 30.0);
    }
    s.push_str("</svg>\n");
    s
}
