//! Quantile table and deviation plot.
//!
//! The CSV has one row per `(cell, delta)` pair, in grid order and then in the
//! order of `deltas`. Columns:
//!
//! | column              | meaning                                                 |
//! |---------------------|---------------------------------------------------------|
//! | `task`              | estimator name                                          |
//! | `n,d,s,k,epsilon`   | grid cell                                               |
//! | `replicates`        | replicates per cell                                     |
//! | `failures`          | replicates whose estimator returned an error            |
//! | `delta`             | requested failure level                                 |
//! | `quantile_level`    | `1 - delta`                                             |
//! | `empirical_quantile`| order statistic `ceil((1 - delta) m)` of the `m` losses |
//! | `radius`            | `risk_radius` from `momvc::vc_calculus`                 |
//! | `coverage`          | fraction of replicates with loss within the radius      |
//! | `nominal_coverage`  | `1 - exp(-k/128)`                                       |
//!
//! Floats use Rust's shortest round-trip formatting. Wall time is never
//! written, so reruns are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::runner::{ExperimentResult, Loss};
use crate::{BenchError, Result};

pub const CSV_HEADER: &str =
    "task,n,d,s,k,epsilon,replicates,failures,delta,quantile_level,empirical_quantile,radius,coverage,nominal_coverage";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Svg,
}

pub fn csv_string(result: &ExperimentResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for cell in &result.cells {
        let c = cell.cell;
        for q in &cell.quantiles {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                result.task,
                c.n,
                c.d,
                c.s,
                c.k,
                c.epsilon,
                result.replicates,
                cell.failures(),
                q.delta,
                q.level,
                q.value,
                cell.bound.risk_radius,
                cell.coverage,
                cell.nominal_coverage
            )
            .unwrap();
        }
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

pub fn write_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    write_file(path, &csv_string(result))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Deviation plot: `x = ln(1/delta)`, `y` = empirical loss quantile, one
/// solid line per cell. The dashed companion is `C sqrt(ln(1/delta)/n)` with
/// `C = radius sqrt(n/k)` (squared for excess-risk losses).
pub fn svg_string(result: &ExperimentResult) -> String {
    let theory = |radius: f64, n: usize, k: usize, x: f64| {
        let c = radius * (n as f64 / k as f64).sqrt();
        let y = c * (x / n as f64).sqrt();
        if result.loss == Loss::ExcessRisk {
            y * y
        } else {
            y
        }
    };
    let xs: Vec<f64> = result.deltas.iter().map(|d| (1.0 / d).ln()).collect();
    let (mut x_lo, mut x_hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !(x_lo.is_finite() && x_hi > x_lo) {
        x_lo = if x_lo.is_finite() { x_lo - 0.5 } else { 0.0 };
        x_hi = x_lo + 1.0;
    }
    let mut y_hi = 0.0f64;
    for cell in &result.cells {
        for (q, &x) in cell.quantiles.iter().zip(&xs) {
            if q.value.is_finite() {
                y_hi = y_hi.max(q.value);
            }
            y_hi = y_hi.max(theory(cell.bound.risk_radius, cell.cell.n, cell.cell.k, x));
        }
    }
    if !(y_hi > 0.0 && y_hi.is_finite()) {
        y_hi = 1.0;
    }
    y_hi *= 1.05;
    let px = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - y / y_hi * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}: empirical loss quantiles</text>"#,
        WIDTH / 2.0,
        result.task
    )
    .unwrap();
    let (x0, y0, x1, y1) = (px(x_lo), py(0.0), px(x_hi), py(y_hi));
    writeln!(s, r#"<path d="M{x0:.2},{y1:.2} V{y0:.2} H{x1:.2}" fill="none" stroke="black"/>"#).unwrap();
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x_lo + t * (x_hi - x_lo), t * y_hi);
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xv:.3}</text>"#,
            px(xv),
            y0 + 16.0
        )
        .unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.3e}</text>"#, x0 - 6.0, py(yv) + 4.0).unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">ln(1/delta)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    )
    .unwrap();
    if xs.is_empty() {
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">no delta levels requested</text>"#,
            WIDTH / 2.0,
            HEIGHT / 2.0
        )
        .unwrap();
    }

    for (i, cell) in result.cells.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let c = cell.cell;
        let points: Vec<String> = cell
            .quantiles
            .iter()
            .zip(&xs)
            .filter(|(q, _)| q.value.is_finite())
            .map(|(q, &x)| format!("{:.2},{:.2}", px(x), py(q.value)))
            .collect();
        if !points.is_empty() {
            writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, points.join(" ")).unwrap();
        }
        let curve: Vec<String> = (0..=32)
            .map(|j| {
                let x = x_lo + j as f64 / 32.0 * (x_hi - x_lo);
                let y = theory(cell.bound.risk_radius, c.n, c.k, x.max(0.0));
                format!("{:.2},{:.2}", px(x), py(y.min(y_hi)))
            })
            .collect();
        if !xs.is_empty() {
            writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-dasharray="5,4"/>"#,
                curve.join(" ")
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">n={} d={} s={} k={} eps={}</text>"#,
            x0 + 10.0,
            y1 + 14.0 * (i as f64 + 1.0),
            c.n,
            c.d,
            c.s,
            c.k,
            c.epsilon
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(result: &ExperimentResult, path: &Path) -> Result<()> {
    write_file(path, &svg_string(result))
}

pub fn emit_outputs(result: &ExperimentResult, format: OutputFormat, path: &Path) -> Result<()> {
    if result.cells.is_empty() {
        return Err(BenchError::Config("experiment result has no cells".into()));
    }
    match format {
        OutputFormat::Csv => write_csv(result, path),
        OutputFormat::Svg => write_svg(result, path),
    }
}
