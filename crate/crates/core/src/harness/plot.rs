//! Mean ± SD curves as standalone SVG files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::sweep::{axis_label, write_aggregate_csv, AggregateRow, SweepResult};
use crate::error::Result;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Metrics in first-appearance order.
fn metrics(rows: &[AggregateRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        if !out.contains(&r.metric) {
            out.push(r.metric.clone());
        }
    }
    out
}

fn methods(rows: &[&AggregateRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        if !out.contains(&r.method) {
            out.push(r.method.clone());
        }
    }
    out
}

struct Scale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
            (lo - pad, hi + pad)
        };
        Scale { lo, hi, px_lo, px_hi }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

/// SVG of one metric: a polyline per method with a shaded ±SD band. Points
/// with a non-finite mean are skipped; a non-finite SD draws no band there.
pub fn render_svg(rows: &[AggregateRow], metric: &str, x_label: &str) -> String {
    let rows: Vec<&AggregateRow> = rows.iter().filter(|r| r.metric == metric && r.mean.is_finite()).collect();
    let sd = |r: &AggregateRow| if r.sd.is_finite() { r.sd } else { 0.0 };
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for r in &rows {
        x_lo = x_lo.min(r.grid_value);
        x_hi = x_hi.max(r.grid_value);
        y_lo = y_lo.min(r.mean - sd(r));
        y_hi = y_hi.max(r.mean + sd(r));
    }
    if rows.is_empty() {
        (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = 0.05 * (y_hi - y_lo);
    let xs = Scale::new(x_lo, x_hi, MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let ys = Scale::new(y_lo - pad, y_hi + pad, HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{metric}</text>"#,
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0
    );
    // axes
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.2} {y1:.2} L{x0:.2} {y0:.2} L{x1:.2} {y0:.2}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let xv = xs.lo + (xs.hi - xs.lo) * k as f64 / 4.0;
        let yv = ys.lo + (ys.hi - ys.lo) * k as f64 / 4.0;
        let (px, py) = (xs.map(xv), ys.map(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_label}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0
    );

    for (k, method) in methods(&rows).iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<&&AggregateRow> = rows.iter().filter(|r| &r.method == method).collect();
        let upper: Vec<String> = pts
            .iter()
            .map(|r| format!("{:.2},{:.2}", xs.map(r.grid_value), ys.map(r.mean + sd(r))))
            .collect();
        let lower: Vec<String> = pts
            .iter()
            .rev()
            .map(|r| format!("{:.2},{:.2}", xs.map(r.grid_value), ys.map(r.mean - sd(r))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon class="band" points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<String> = pts
            .iter()
            .map(|r| format!("{:.2},{:.2}", xs.map(r.grid_value), ys.map(r.mean)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-method="{method}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let ly = MARGIN_TOP + 10.0 + 20.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{method}</text>"#,
            x1 + 15.0,
            x1 + 40.0,
            x1 + 45.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

/// Writes `aggregate.csv` and one `<metric>.svg` per metric into `dir`.
/// Returns the paths written.
pub fn emit_plots(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let rows = result.aggregate();
    let mut written = Vec::new();
    let agg_path = dir.join("aggregate.csv");
    let mut buf = Vec::new();
    write_aggregate_csv(&rows, &mut buf)?;
    fs::write(&agg_path, buf)?;
    written.push(agg_path);
    let label = axis_label(&result.axis);
    for metric in metrics(&rows) {
        let path = dir.join(format!("{metric}.svg"));
        fs::write(&path, render_svg(&rows, &metric, &label))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sweep::{read_aggregate_csv, SweepRow};

    fn result() -> SweepResult {
        let mut rows = Vec::new();
        for g in 0..5 {
            for seed in 0..3u64 {
                for (m, base) in [("naive", 0.5), ("proxy", 0.3)] {
                    rows.push(SweepRow {
                        grid_value: 0.7 + 0.01 * g as f64,
                        seed,
                        method: m.into(),
                        metric: "rel_error".into(),
                        value: base + 0.01 * g as f64 + 0.001 * seed as f64,
                    });
                }
            }
        }
        SweepResult {
            axis: "gamma".into(),
            rows,
        }
    }

    #[test]
    fn one_series_per_method() {
        let svg = render_svg(&result().aggregate(), "rel_error", "gamma");
        assert_eq!(svg.matches("<polyline class=\"series\"").count(), 2);
        assert_eq!(svg.matches("<polygon class=\"band\"").count(), 2);
    }

    #[test]
    fn deterministic_bytes_and_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        let written = emit_plots(&result(), &a).unwrap();
        emit_plots(&result(), &b).unwrap();
        for p in &written {
            let name = p.file_name().unwrap();
            assert_eq!(fs::read(p).unwrap(), fs::read(b.join(name)).unwrap());
        }
        let back = read_aggregate_csv(&fs::read_to_string(a.join("aggregate.csv")).unwrap()).unwrap();
        assert_eq!(back, result().aggregate());
    }
}
