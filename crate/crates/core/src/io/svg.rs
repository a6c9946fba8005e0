//! Minimal standalone SVG renderer for convergence traces and recall
//! curves. No rendering dependencies; output is diffable text.

use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#2a9d4e", "#1f6fb2", "#d62728", "#7f5fc4", "#c78a12", "#17a2b8", "#8c564b", "#444444",
];

#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Drawn up to the blow-up point and marked in the legend.
    pub diverged: bool,
}

#[derive(Debug, Clone)]
pub struct PlotConfig {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Log-scale y (convergence traces); linear otherwise (recall curves).
    pub log_y: bool,
}

/// Renders the series to a standalone SVG file.
pub fn render_plot(series: &[PlotSeries], cfg: &PlotConfig, path: &Path) -> Result<()> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::InvalidConfig("render_plot: no data to draw".into()));
    }
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            if x.is_finite() {
                xs.push(x);
            }
            if y.is_finite() && (!cfg.log_y || y > 0.0) {
                ys.push(y);
            }
        }
    }
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InvalidConfig(
            "render_plot: no finite drawable points".into(),
        ));
    }
    let (x_min, x_max) = min_max(&xs);
    let (mut y_min, mut y_max) = min_max(&ys);
    if cfg.log_y {
        y_min = y_min.log10();
        y_max = y_max.log10();
    }
    if (y_max - y_min).abs() < 1e-12 {
        y_min -= 1.0;
        y_max += 1.0;
    }
    if (x_max - x_min).abs() < 1e-12 {
        return render_degenerate_x(series, cfg, path, x_min, y_min, y_max);
    }

    let to_px = |x: f64, y: f64| -> (f64, f64) {
        let ty = if cfg.log_y { y.log10() } else { y };
        let px = MARGIN_L + (x - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
        let py =
            HEIGHT - MARGIN_B - (ty - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_T - MARGIN_B);
        (px, py)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"22\" font-size=\"15\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        escape(&cfg.title)
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B
    ));
    // axis labels
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 12.0,
        escape(&cfg.x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        escape(&cfg.y_label)
    ));
    // y ticks
    for i in 0..=4 {
        let ty = y_min + (y_max - y_min) * i as f64 / 4.0;
        let label = if cfg.log_y {
            format!("1e{:.0}", ty.round())
        } else {
            format!("{ty:.2}")
        };
        let py =
            HEIGHT - MARGIN_B - (ty - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_T - MARGIN_B);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{MARGIN_L}\" y2=\"{py}\" stroke=\"black\"/>\n",
            MARGIN_L - 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\" font-family=\"sans-serif\">{label}</text>\n",
            MARGIN_L - 7.0,
            py + 3.0
        ));
    }
    // x ticks
    for i in 0..=4 {
        let tx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let px = MARGIN_L + (tx - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
        svg.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>\n",
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\" font-family=\"sans-serif\">{tx:.0}</text>\n",
            HEIGHT - MARGIN_B + 16.0
        ));
    }

    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let drawable: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!cfg.log_y || *y > 0.0))
            .cloned()
            .collect();
        if drawable.is_empty() {
            continue;
        }
        let pts: Vec<String> = drawable
            .iter()
            .map(|&(x, y)| {
                let (px, py) = to_px(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        if s.diverged {
            let &(x, y) = drawable.last().unwrap();
            let (px, py) = to_px(x, y);
            svg.push_str(&format!(
                "<text x=\"{px}\" y=\"{py}\" font-size=\"14\" fill=\"{color}\" text-anchor=\"middle\" font-family=\"sans-serif\">&#215;</text>\n"
            ));
        }
        // legend
        let ly = MARGIN_T + 18.0 * si as f64;
        let lx = WIDTH - MARGIN_R + 12.0;
        svg.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 22.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" font-family=\"sans-serif\">{}{}</text>\n",
            lx + 27.0,
            ly + 4.0,
            escape(&s.label),
            if s.diverged { " (diverged)" } else { "" }
        ));
    }
    svg.push_str("</svg>\n");

    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &svg)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn render_degenerate_x(
    series: &[PlotSeries],
    cfg: &PlotConfig,
    path: &Path,
    x: f64,
    _y_min: f64,
    _y_max: f64,
) -> Result<()> {
    // Single-x plots (one-shot methods) widen the x range artificially.
    let widened: Vec<PlotSeries> = series
        .iter()
        .map(|s| PlotSeries {
            label: s.label.clone(),
            points: s
                .points
                .iter()
                .flat_map(|&(_, y)| [(x - 0.5, y), (x + 0.5, y)])
                .collect(),
            diverged: s.diverged,
        })
        .collect();
    render_plot(&widened, cfg, path)
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Tag-stack well-formedness check, enough to validate our own output in
/// tests without an XML dependency.
pub fn is_well_formed_xml(doc: &str) -> bool {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = doc;
    while let Some(start) = rest.find('<') {
        let Some(end_rel) = rest[start..].find('>') else {
            return false;
        };
        let tag = &rest[start + 1..start + end_rel];
        rest = &rest[start + end_rel + 1..];
        if tag.starts_with('?') || tag.starts_with('!') {
            continue;
        }
        if let Some(name) = tag.strip_prefix('/') {
            match stack.pop() {
                Some(open) if open == name.trim() => {}
                _ => return false,
            }
        } else if tag.ends_with('/') {
            continue;
        } else {
            let name = tag.split_whitespace().next().unwrap_or("");
            if name.is_empty() {
                return false;
            }
            stack.push(name.to_string());
        }
    }
    stack.is_empty()
}
