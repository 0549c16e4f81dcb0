use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::metrics::ReportRow;
use crate::error::{Error, Result};

const BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width bins spanning the data; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let bins = bins.max(1);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let b = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    Histogram { edges, counts }
}

fn file_stem(model: &str) -> String {
    model
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn svg(model: &str, h: &Histogram) -> String {
    let (w, ht, pad) = (480.0, 240.0, 30.0);
    let max = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let bw = (w - 2.0 * pad) / h.counts.len() as f64;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{ht}" viewBox="0 0 {w} {ht}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{ht}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{pad}" y="18" font-family="sans-serif" font-size="12">{model} error distribution</text>"#);
    for (i, &c) in h.counts.iter().enumerate() {
        let bh = (ht - 2.0 * pad) * c as f64 / max;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="steelblue"/>"#,
            pad + bw * i as f64,
            ht - pad - bh,
            (bw - 1.0).max(0.5),
            bh
        );
    }
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, ht - pad, w - pad);
    let last = h.edges.len() - 1;
    let _ = writeln!(s, r#"<text x="{pad}" y="{:.0}" font-family="sans-serif" font-size="10">{:.3}</text>"#, ht - 10.0, h.edges[0]);
    let _ = writeln!(
        s,
        r#"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="10" text-anchor="end">{:.3}</text>"#,
        w - pad,
        ht - 10.0,
        h.edges[last]
    );
    s.push_str("</svg>\n");
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `report_table.csv`, and per model `hist_<model>.csv` with an SVG
/// plot of the same bins. Rows of one model are pooled for its histogram.
pub fn export_report(rows: &[ReportRow], out_dir: impl AsRef<Path>) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Argument("nothing to report".into()));
    }
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut table = String::from("model,scenario_class,metric,value\n");
    let mut pooled: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in rows {
        for (name, v) in r.metrics.named() {
            let _ = writeln!(table, "{},{},{name},{v}", r.model, r.scenario_class);
        }
        pooled.entry(&r.model).or_default().extend_from_slice(&r.errors);
    }
    write(&dir.join("report_table.csv"), &table)?;
    for (model, errors) in pooled {
        let h = histogram(&errors, BINS);
        let mut csv = String::from("bin_left,bin_right,count\n");
        for (i, c) in h.counts.iter().enumerate() {
            let _ = writeln!(csv, "{},{},{c}", h.edges[i], h.edges[i + 1]);
        }
        let stem = file_stem(model);
        write(&dir.join(format!("hist_{stem}.csv")), &csv)?;
        write(&dir.join(format!("hist_{stem}.svg")), &svg(model, &h))?;
    }
    Ok(())
}
