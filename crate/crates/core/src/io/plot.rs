//! Standalone SVG line chart of a threshold sweep: x = log10(p_t),
//! y = number of detected biases, one polyline per model.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::analysis::SweepResult;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("cannot plot: {0}")]
    Invalid(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 13] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#637939", "#843c39",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn render_sweep_svg(sweep: &SweepResult, grid: &[f64]) -> Result<String, PlotError> {
    if grid.is_empty() {
        return Err(PlotError::Invalid("empty threshold grid".into()));
    }
    if sweep.per_model.is_empty() {
        return Err(PlotError::Invalid("sweep has no models".into()));
    }
    if grid.iter().any(|&t| t.is_nan() || t <= 0.0) {
        return Err(PlotError::Invalid("thresholds must be positive".into()));
    }
    if let Some((m, _)) = sweep.per_model.iter().find(|(_, c)| c.len() != grid.len()) {
        return Err(PlotError::Invalid(format!(
            "model `{m}` has a count curve of the wrong length"
        )));
    }

    let xs: Vec<f64> = grid.iter().map(|t| t.log10()).collect();
    let (mut x_lo, mut x_hi) = (xs[0], xs[xs.len() - 1]);
    if x_hi - x_lo < 1e-12 {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    let y_max = sweep
        .per_model
        .values()
        .flatten()
        .copied()
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| TOP + plot_h - y / y_max * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">Detected biases vs threshold ({})</text>"#,
        LEFT + plot_w / 2.0,
        escape(&sweep.layer)
    );

    // Axes.
    let (x0, y0) = (LEFT, TOP + plot_h);
    let _ = writeln!(
        svg,
        r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#,
        LEFT + plot_w
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{x0}" y1="{TOP}" x2="{x0}" y2="{y0}" stroke="black"/>"#
    );
    let mut decade = x_lo.ceil() as i32;
    while decade as f64 <= x_hi + 1e-9 {
        let x = px(decade as f64);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">1e{decade}</text>"#,
            y0 + 5.0,
            y0 + 20.0
        );
        decade += 1;
    }
    let step = ((y_max / 5.0).ceil()).max(1.0);
    let mut tick = 0.0;
    while tick <= y_max + 1e-9 {
        let y = py(tick);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{tick}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0
        );
        tick += step;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">log10(p_t)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">number of biases</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (i, (model, counts)) in sweep.per_model.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = xs
            .iter()
            .zip(counts)
            .map(|(&x, &c)| format!("{:.2},{:.2}", px(x), py(c as f64)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"><title>{}</title></polyline>"#,
            points.join(" "),
            escape(model)
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(model)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_sweep_plot(sweep: &SweepResult, grid: &[f64], path: &Path) -> Result<(), PlotError> {
    let svg = render_sweep_svg(sweep, grid)?;
    fs::write(path, svg).map_err(|source| PlotError::Io {
        path: path.to_path_buf(),
        source,
    })
}
