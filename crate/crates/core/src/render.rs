//! Self-contained SVG plots with fixed number formatting, so renderings are
//! byte-stable and diffable.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>, color: &'static str) -> Self {
        Series {
            name: name.into(),
            points,
            color,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

/// Shaded region between two curves sharing x values.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub x: Vec<f64>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn open(svg: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(svg, "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>", WIDTH / 2.0, escape(title));
    let _ = writeln!(svg, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", WIDTH / 2.0, HEIGHT - 15.0, escape(x_label));
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

fn axes(svg: &mut String, f: &Frame) {
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"black\"/>",
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let x = f.x0 + t * (f.x1 - f.x0);
        let y = f.y0 + t * (f.y1 - f.y0);
        let _ = writeln!(svg, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", f.px(x), HEIGHT - MARGIN + 16.0, tick(x));
        let _ = writeln!(svg, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", MARGIN - 4.0, f.py(y) + 4.0, tick(y));
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

/// Line plot with an optional shaded band drawn underneath.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], band: Option<&Band>) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).chain(band.iter().flat_map(|b| b.x.iter().copied()));
    let ys = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .chain(band.iter().flat_map(|b| b.low.iter().chain(&b.high).copied()));
    let fin = |it: &mut dyn Iterator<Item = f64>| it.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (x0, x1) = fin(&mut { xs });
    let (y0, y1) = fin(&mut { ys });
    let (x0, x1) = if x0.is_finite() { widen(x0, x1) } else { (0.0, 1.0) };
    let (y0, y1) = if y0.is_finite() { widen(y0.min(0.0), y1) } else { (0.0, 1.0) };
    let frame = Frame { x0, x1, y0, y1 };

    let mut svg = String::new();
    open(&mut svg, title, x_label, y_label);
    if let Some(b) = band {
        let mut d = String::new();
        for (x, hi) in b.x.iter().zip(&b.high) {
            let _ = write!(d, "{}{:.2},{:.2} ", if d.is_empty() { "M" } else { "L" }, frame.px(*x), frame.py(*hi));
        }
        for (x, lo) in b.x.iter().zip(&b.low).rev() {
            let _ = write!(d, "L{:.2},{:.2} ", frame.px(*x), frame.py(*lo));
        }
        let _ = writeln!(svg, "<path d=\"{}Z\" fill=\"#bbbbbb\" fill-opacity=\"0.6\" stroke=\"none\"/>", d);
    }
    for (i, s) in series.iter().enumerate() {
        let mut d = String::new();
        for (x, y) in s.points.iter().filter(|p| p.1.is_finite()) {
            let _ = write!(d, "{}{:.2},{:.2} ", if d.is_empty() { "M" } else { "L" }, frame.px(*x), frame.py(*y));
        }
        let dash = if s.dashed { " stroke-dasharray=\"5,3\"" } else { "" };
        let _ = writeln!(svg, "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\"{dash}/>", d.trim_end(), s.color);
        let ly = MARGIN + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{ly:.1}\" text-anchor=\"end\" fill=\"{}\">{}</text>",
            WIDTH - MARGIN - 6.0,
            s.color,
            escape(&s.name)
        );
    }
    axes(&mut svg, &frame);
    svg.push_str("</svg>\n");
    svg
}

/// Heatmap of `values[row][col]`; rows run along y, columns along x.
/// `None` cells are left blank. Colors scale with `value / max`.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, x_range: (f64, f64), y_range: (f64, f64), values: &[Vec<Option<f64>>]) -> String {
    let frame = Frame {
        x0: x_range.0,
        x1: x_range.1,
        y0: y_range.0,
        y1: y_range.1,
    };
    let mut svg = String::new();
    open(&mut svg, title, x_label, y_label);
    let rows = values.len();
    let cols = values.first().map_or(0, Vec::len);
    let max = values.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(*v));
    if rows > 0 && cols > 0 && max > 0.0 {
        let cw = (WIDTH - 2.0 * MARGIN) / cols as f64;
        let rh = (HEIGHT - 2.0 * MARGIN) / rows as f64;
        for (r, row) in values.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let Some(v) = v.filter(|v| *v > 0.0) else { continue };
                let level = (255.0 * (1.0 - (v / max).clamp(0.0, 1.0))).round() as u8;
                let _ = writeln!(
                    svg,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#{level:02x}{level:02x}ff\"/>",
                    MARGIN + c as f64 * cw,
                    HEIGHT - MARGIN - (r + 1) as f64 * rh,
                    cw,
                    rh
                );
            }
        }
    }
    axes(&mut svg, &frame);
    svg.push_str("</svg>\n");
    svg
}
