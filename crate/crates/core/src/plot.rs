//! Minimal SVG charts for the sweep, histogram and score tables.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#7f7f7f",
];
const NOISE_COLOR: &str = "#c8c8c8";

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
            match (lo.is_finite(), hi > lo) {
                (false, _) => (0.0, 1.0),
                (true, true) => (lo, hi),
                (true, false) => (lo - 0.5, hi + 0.5),
            }
        };
        Self {
            x: span(&mut xs.clone()),
            y: span(&mut ys.clone()),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open(title: &str, x_label: &str, y_label: &str, frame: &Frame) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, y0) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0:.1},{:.1} L{x0:.1},{y0:.1} L{:.1},{y0:.1}" fill="none" stroke="black"/>"#,
        MARGIN,
        WIDTH - MARGIN
    );
    for (value, anchor_x) in [
        (frame.x.0, frame.px(frame.x.0)),
        (frame.x.1, frame.px(frame.x.1)),
    ] {
        let _ = writeln!(
            svg,
            r#"<text x="{anchor_x:.1}" y="{:.1}" text-anchor="middle">{value:.3}</text>"#,
            y0 + 16.0
        );
    }
    for (value, anchor_y) in [
        (frame.y.0, frame.py(frame.y.0)),
        (frame.y.1, frame.py(frame.y.1)),
    ] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{value:.3}</text>"#,
            x0 - 6.0,
            anchor_y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Polyline through `(x, y)` points with markers; gaps (`None`) break the line.
pub fn line_chart(
    points: &[(f64, Option<f64>)],
    title: &str,
    x_label: &str,
    y_label: &str,
) -> String {
    let defined: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|&(x, y)| y.map(|y| (x, y)))
        .collect();
    let frame = Frame::new(
        points.iter().map(|p| p.0),
        defined.iter().map(|p| p.1).chain(std::iter::once(0.0)),
    );
    let mut svg = open(title, x_label, y_label, &frame);
    let mut path = String::new();
    let mut pen_down = false;
    for &(x, y) in points {
        match y {
            Some(y) => {
                let _ = write!(
                    path,
                    "{}{:.1},{:.1} ",
                    if pen_down { "L" } else { "M" },
                    frame.px(x),
                    frame.py(y)
                );
                pen_down = true;
            }
            None => pen_down = false,
        }
    }
    let _ = writeln!(
        svg,
        r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
        path.trim_end(),
        PALETTE[0]
    );
    for (x, y) in defined {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{}"/>"#,
            frame.px(x),
            frame.py(y),
            PALETTE[0]
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Bars spanning `[lower, upper)` with height `count`; an optional vertical
/// marker (e.g. a threshold) is drawn in red.
pub fn bar_chart(
    bars: &[(f64, f64, f64)],
    marker: Option<f64>,
    title: &str,
    x_label: &str,
    y_label: &str,
) -> String {
    let frame = Frame::new(
        bars.iter().flat_map(|b| [b.0, b.1]),
        bars.iter().map(|b| b.2).chain(std::iter::once(0.0)),
    );
    let mut svg = open(title, x_label, y_label, &frame);
    for &(lo, hi, count) in bars {
        let (x0, x1) = (frame.px(lo), frame.px(hi));
        let (y_top, y_base) = (frame.py(count), frame.py(0.0));
        let _ = writeln!(
            svg,
            r#"<rect x="{x0:.1}" y="{y_top:.1}" width="{:.1}" height="{:.1}" fill="{}" stroke="white" stroke-width="0.5"/>"#,
            (x1 - x0).max(0.0),
            (y_base - y_top).max(0.0),
            PALETTE[0]
        );
    }
    if let Some(m) = marker {
        let x = frame.px(m);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="{}" stroke-dasharray="4 3"/>"#,
            MARGIN,
            HEIGHT - MARGIN,
            PALETTE[3]
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Scatter of `(x, y)` colored by cluster label (`-1` drawn grey).
pub fn scatter(points: &[(f64, f64, i64)], title: &str, x_label: &str, y_label: &str) -> String {
    let frame = Frame::new(points.iter().map(|p| p.0), points.iter().map(|p| p.1));
    let mut svg = open(title, x_label, y_label, &frame);
    // noise first so clusters stay visible
    let mut ordered: Vec<&(f64, f64, i64)> = points.iter().collect();
    ordered.sort_by_key(|p| p.2 >= 0);
    for &&(x, y, label) in &ordered {
        let color = if label < 0 {
            NOISE_COLOR
        } else {
            PALETTE[label as usize % PALETTE.len()]
        };
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.1}" cy="{:.1}" r="1.8" fill="{color}" fill-opacity="0.7"/>"#,
            frame.px(x),
            frame.py(y)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
