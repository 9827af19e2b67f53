//! Deterministic CSV emission, the matching reader, and a dependency-free
//! SVG line plot.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// One number at `precision` significant digits; scientific notation so
/// the round trip is lossless at that precision.
pub fn format_value(v: f64, precision: usize) -> String {
    format!("{:.*e}", precision - 1, v)
}

impl CsvTable {
    pub fn render(&self, precision: usize) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> =
                row.iter().map(|&v| format_value(v, precision)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table = CsvTable::default();
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            if let Some(comment) = raw.strip_prefix('#') {
                table.comments.push(comment.trim().to_string());
                continue;
            }
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if table.columns.is_empty() {
                table.columns = line.split(',').map(|s| s.trim().to_string()).collect();
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| {
                Error::Config(format!("csv line {lineno}: {e}"))
            })?;
            if row.len() != table.columns.len() {
                return Err(Error::Config(format!(
                    "csv line {lineno}: {} cells for {} columns",
                    row.len(),
                    table.columns.len()
                )));
            }
            table.rows.push(row);
        }
        if table.columns.is_empty() {
            return Err(Error::Config("csv has no column header".into()));
        }
        Ok(table)
    }
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub points: Vec<(f64, f64)>,
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const ML: f64 = 70.0; // left margin
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

fn axis_ticks(lo: f64, hi: f64, log: bool) -> Vec<(f64, String)> {
    if log {
        let k0 = lo.ceil() as i64;
        let k1 = hi.floor() as i64;
        (k0..=k1)
            .map(|k| (k as f64, format!("1e{k}")))
            .collect()
    } else {
        let n = 5;
        (0..=n)
            .map(|i| {
                let v = lo + (hi - lo) * i as f64 / n as f64;
                (v, format!("{v:.3}"))
            })
            .collect()
    }
}

/// Self-contained SVG: one polyline, axes, ticks (decade ticks on log
/// axes), labels. No external assets.
pub fn render_svg(plot: &Plot) -> String {
    let map = |v: f64, log: bool| if log { v.log10() } else { v };
    let pts: Vec<(f64, f64)> = plot
        .points
        .iter()
        .filter(|&&(x, y)| (!plot.log_x || x > 0.0) && (!plot.log_y || y > 0.0))
        .map(|&(x, y)| (map(x, plot.log_x), map(y, plot.log_y)))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x0 < x1) {
        x1 = x0 + 1.0;
    }
    if !(y0 < y1) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        0.5 * W,
        plot.title
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR,
        H - MB
    ));
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        H - MB
    ));
    for (v, label) in axis_ticks(x0, x1, plot.log_x) {
        let px = sx(v);
        svg.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{:.1}\" x2=\"{px:.2}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            H - MB,
            H - MB + 6.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>\n",
            H - MB + 20.0
        ));
    }
    for (v, label) in axis_ticks(y0, y1, plot.log_y) {
        let py = sy(v);
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{py:.2}\" x2=\"{ML}\" y2=\"{py:.2}\" stroke=\"black\"/>\n",
            ML - 6.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>\n",
            ML - 10.0,
            py + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
        0.5 * (ML + W - MR),
        H - 12.0,
        plot.x_label
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
        0.5 * (MT + H - MB),
        0.5 * (MT + H - MB),
        plot.y_label
    ));
    let path: Vec<String> = pts
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        path.join(" ")
    ));
    svg.push_str("</svg>\n");
    svg
}
