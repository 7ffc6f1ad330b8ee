//! Minimal self-contained SVG line/scatter plots.
//!
//! No plotting dependency: every figure here is polylines, circles, ticks,
//! and a legend, which is comfortably within hand-written SVG. Output is
//! deterministic: same input, byte-identical file.

use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 52.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// One named sequence of `(x, y)` points.
#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Series {
        Series { label: label.into(), points }
    }
}

/// How the series set is drawn.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PlotKind {
    /// Every series as a polyline.
    Line,
    /// First series as scatter markers (the data), remaining series as
    /// polylines (fit overlays).
    ScatterFit,
}

/// Axis labels and title.
#[derive(Clone, Debug, Default)]
pub struct PlotConfig {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Compact tick label: enough digits to distinguish ticks, no trailing zeros.
fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn data_bounds(series: &[Series]) -> Result<(f64, f64, f64, f64)> {
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "non-finite point in series {:?}",
                    s.label
                )));
            }
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    // Pad 5% on each side; give degenerate spans unit breathing room.
    let pad = |lo: f64, hi: f64| {
        if hi > lo {
            let p = 0.05 * (hi - lo);
            (lo - p, hi + p)
        } else {
            (lo - 1.0, hi + 1.0)
        }
    };
    let (xmin, xmax) = pad(xmin, xmax);
    let (ymin, ymax) = pad(ymin, ymax);
    Ok((xmin, xmax, ymin, ymax))
}

/// Renders the plot as an SVG document string.
pub fn render_plot(series: &[Series], kind: PlotKind, cfg: &PlotConfig) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::InvalidConfig("nothing to plot: no series with points".into()));
    }
    let (xmin, xmax, ymin, ymax) = data_bounds(series)?;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - xmin) / (xmax - xmin) * plot_w;
    let sy = |y: f64| HEIGHT - MARGIN_BOTTOM - (y - ymin) / (ymax - ymin) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Frame.
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n"
    ));

    // Ticks and grid labels, five per axis.
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = xmin + f * (xmax - xmin);
        let xpix = sx(xv);
        svg.push_str(&format!(
            "<line x1=\"{xpix:.2}\" y1=\"{:.2}\" x2=\"{xpix:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            HEIGHT - MARGIN_BOTTOM,
            HEIGHT - MARGIN_BOTTOM + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{xpix:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{}</text>\n",
            HEIGHT - MARGIN_BOTTOM + 18.0,
            fmt_tick(xv)
        ));
        let yv = ymin + f * (ymax - ymin);
        let ypix = sy(yv);
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ypix:.2}\" x2=\"{MARGIN_LEFT}\" y2=\"{ypix:.2}\" \
             stroke=\"black\"/>\n",
            MARGIN_LEFT - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 8.0,
            ypix + 4.0,
            fmt_tick(yv)
        ));
    }

    // Title and axis labels.
    if !cfg.title.is_empty() {
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" \
             text-anchor=\"middle\">{}</text>\n",
            WIDTH / 2.0,
            escape(&cfg.title)
        ));
    }
    if !cfg.x_label.is_empty() {
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" \
             text-anchor=\"middle\">{}</text>\n",
            MARGIN_LEFT + plot_w / 2.0,
            HEIGHT - 12.0,
            escape(&cfg.x_label)
        ));
    }
    if !cfg.y_label.is_empty() {
        let cx = 16.0;
        let cy = MARGIN_TOP + plot_h / 2.0;
        svg.push_str(&format!(
            "<text x=\"{cx:.2}\" y=\"{cy:.2}\" font-family=\"sans-serif\" font-size=\"13\" \
             text-anchor=\"middle\" transform=\"rotate(-90 {cx:.2} {cy:.2})\">{}</text>\n",
            escape(&cfg.y_label)
        ));
    }

    // Series bodies.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let scatter = kind == PlotKind::ScatterFit && i == 0;
        if scatter {
            for &(x, y) in &s.points {
                svg.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                    sx(x),
                    sy(y)
                ));
            }
        } else if !s.points.is_empty() {
            let coords: Vec<String> =
                s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                coords.join(" ")
            ));
        }
    }

    // Legend, top-right inside the frame.
    let legend_x = WIDTH - MARGIN_RIGHT - 150.0;
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = MARGIN_TOP + 16.0 + 18.0 * i as f64;
        let scatter = kind == PlotKind::ScatterFit && i == 0;
        if scatter {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                legend_x + 12.0,
                y - 4.0
            ));
        } else {
            svg.push_str(&format!(
                "<line x1=\"{legend_x:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
                 stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                y - 4.0,
                legend_x + 24.0,
                y - 4.0
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{y:.2}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            legend_x + 30.0,
            escape(&s.label)
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders and writes the plot.
pub fn emit_plot(series: &[Series], kind: PlotKind, cfg: &PlotConfig, path: &Path) -> Result<()> {
    let svg = render_plot(series, kind, cfg)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(svg.as_bytes())?;
    Ok(())
}
