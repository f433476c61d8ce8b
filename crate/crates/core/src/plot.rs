//! Standalone SVG line charts of training curves.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::metrics::{read_metrics, MetricsError, MetricsRow};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

/// `(file stem, axis label, column)` of each chart.
pub const CHARTS: [(&str, &str, fn(&MetricsRow) -> f64); 4] = [
    ("episode_reward", "episode reward", |r| r.ep_reward),
    ("success_rate", "success rate", |r| r.success_rate),
    ("episode_cost", "episode cost", |r| r.ep_cost),
    ("feasible_rate", "feasible state rate", |r| r.feasible_rate),
];

/// Chart-space coordinates of a series: x grows with steps and y grows
/// upward on screen with the value (so it decreases in SVG units).
pub fn polyline_points(xs: &[f64], ys: &[f64]) -> Vec<(f64, f64)> {
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        }
    };
    let (x0, x1) = span(xs);
    let (y0, y1) = span(ys);
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            (
                MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN),
                HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN),
            )
        })
        .collect()
}

pub fn line_chart(title: &str, xs: &[f64], ys: &[f64]) -> String {
    let pts = polyline_points(xs, ys);
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0,
        MARGIN / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">steps</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    for (v, y) in [(hi, t), (lo, b)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            l - 4.0,
            y + 4.0,
            format_tick(v)
        );
    }
    let points: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
        points.join(" ")
    );
    svg.push_str("</svg>\n");
    svg
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

/// Reads a metrics CSV and writes the four curve charts into `out_dir`.
/// Nothing is written if the CSV fails to parse.
pub fn plot_metrics(csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, MetricsError> {
    let rows = read_metrics(csv)?;
    let io_err = |path: &Path, source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let xs: Vec<f64> = rows.iter().map(|r| r.steps as f64).collect();
    let mut paths = Vec::with_capacity(CHARTS.len());
    for (stem, label, column) in CHARTS {
        let ys: Vec<f64> = rows.iter().map(column).collect();
        let path = out_dir.join(format!("{stem}.svg"));
        std::fs::write(&path, line_chart(label, &xs, &ys)).map_err(|e| io_err(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
