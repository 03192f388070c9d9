//! Flat-text forms: `index,value_ns` series and `key=value` reports.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{DispersionSeries, EstimateReport, SeriesKind};

pub const SERIES_HEADER: &str = "index,value_ns";

pub fn write_series<F: Scalar>(series: &DispersionSeries<F>) -> String {
    let mut out = String::with_capacity(series.len() * 16);
    let kind = match series.kind {
        SeriesKind::TwoSidedConsecutive => "two_sided",
        SeriesKind::OneSidedNormalized => "one_sided",
    };
    let _ = writeln!(out, "# kind={kind}");
    let _ = writeln!(out, "{SERIES_HEADER}");
    for (i, v) in series.values.iter().enumerate() {
        let _ = writeln!(out, "{i},{v}");
    }
    out
}

pub fn read_series<F: Scalar>(text: &str) -> Result<DispersionSeries<F>> {
    let mut kind = SeriesKind::TwoSidedConsecutive;
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == SERIES_HEADER {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if meta.trim() == "kind=one_sided" {
                kind = SeriesKind::OneSidedNormalized;
            }
            continue;
        }
        let (_, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("line {}: expected index,value_ns", n + 1)))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        values.push(F::of(v));
    }
    let mut s = DispersionSeries::two_sided(values)?;
    s.kind = kind;
    Ok(s)
}

/// Report as sorted `key=value` lines; segments appear as
/// `segment.<i>=start..end@mean`.
pub fn write_report<F: Scalar>(report: &EstimateReport<F>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "method={}", report.method);
    let _ = writeln!(out, "capacity_pps={:.3}", report.capacity_pps.to_f64_lossy());
    let _ = writeln!(out, "delta_star_ns={:.3}", report.delta_star_ns.to_f64_lossy());
    let _ = writeln!(out, "packets_sent={}", report.packets_sent);
    if let Some(seg) = &report.segmentation {
        for (i, s) in seg.segments.iter().enumerate() {
            let _ = writeln!(out, "segment.{i}={}..{}@{:.3}", s.start, s.end, s.mean.to_f64_lossy());
        }
    }
    for (k, v) in &report.diagnostics {
        let _ = writeln!(out, "diag.{k}={v}");
    }
    out
}
