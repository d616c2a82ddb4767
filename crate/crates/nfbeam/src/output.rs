//! CSV tables with a `# key=value` header block, and small SVG line charts.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nfbeam_core::sim::{MetricsRecord, TrialRow};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A table ready to be written.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest text that parses back to the same `f64`.
pub fn real(x: f64) -> String {
    format!("{x:?}")
}

fn optional(x: Option<f64>) -> String {
    x.map_or_else(String::new, real)
}

/// Write `table` to `path` after `# nfbeam_version=...` and one
/// `# key=value` line per `header` entry.
pub fn write_csv(path: &Path, header: &[(String, String)], table: &Table) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(format!("cannot create '{}'", path.display()), e))?;
    let mut out = BufWriter::new(file);
    let io = |e| CliError::io(format!("cannot write '{}'", path.display()), e);
    writeln!(out, "# nfbeam_version={VERSION}").map_err(io)?;
    for (k, v) in header {
        writeln!(out, "# {k}={v}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn trial_table(rows: &[TrialRow]) -> Table {
    Table {
        columns: vec![
            "trial",
            "snr_db",
            "scheme",
            "user",
            "theta",
            "r",
            "theta_hat",
            "r_hat",
            "pilots",
            "sinr",
            "rate",
            "outage",
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.trial.to_string(),
                    real(r.snr_db),
                    r.scheme.name().to_string(),
                    r.user.to_string(),
                    real(r.theta),
                    real(r.r),
                    real(r.theta_hat),
                    real(r.r_hat),
                    r.pilots.to_string(),
                    optional(r.sinr),
                    optional(r.rate),
                    u8::from(r.outage).to_string(),
                ]
            })
            .collect(),
    }
}

pub fn metrics_table(records: &[MetricsRecord]) -> Table {
    Table {
        columns: vec![
            "scheme",
            "snr_db",
            "samples",
            "outages",
            "nmse_theta",
            "nmse_r",
            "mean_rate",
            "mean_pilots",
        ],
        rows: records
            .iter()
            .map(|m| {
                vec![
                    m.scheme.name().to_string(),
                    real(m.snr_db),
                    m.samples.to_string(),
                    m.outages.to_string(),
                    real(m.nmse_theta),
                    real(m.nmse_r),
                    real(m.mean_rate),
                    real(m.mean_pilots),
                ]
            })
            .collect(),
    }
}

/// Named series of `(x, y)` points.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#555555"];

/// Plain line chart. With `log_y` non-positive values are dropped.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|&(x, y)| x.is_finite() && y.is_finite() && (!log_y || y > 0.0))
        .map(|(x, y)| (x, ty(y)))
        .collect();
    let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&(f64, f64)) -> f64| pts.iter().map(pick).fold(init, f);
    let (mut x0, mut x1) = (
        fold(f64::min, f64::INFINITY, |p| p.0),
        fold(f64::max, f64::NEG_INFINITY, |p| p.0),
    );
    let (mut y0, mut y1) = (
        fold(f64::min, f64::INFINITY, |p| p.1),
        fold(f64::max, f64::NEG_INFINITY, |p| p.1),
    );
    if pts.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" font-size="15">{}</text>"#,
        left,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let ylab = if log_y {
            format!("1e{fy:.1}")
        } else {
            format!("{fy:.3}")
        };
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{fx:.3}</text>"#,
            px(fx),
            h - bottom + 16.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{ylab}</text>"#,
            left - 6.0,
            py(fy) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (left + w - right) / 2.0,
        h - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">{}</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|&&(x, y)| x.is_finite() && y.is_finite() && (!log_y || y > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(ty(y))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let ly = top + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            w - right + 10.0,
            w - right + 30.0,
            w - right + 35.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("cannot write '{}'", path.display()), e))
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create '{}'", dir.display()), e))?;
    Ok(dir.to_path_buf())
}
