use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::dispersion::Estimator;

pub const RESULTS_HEADER: &str = "scenario,method,mdape_pct,err_p25,err_p75,packets_sent_median,runs,failures";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub scenario: String,
    pub method: Estimator,
    pub mdape_pct: f64,
    pub err_p25: f64,
    pub err_p75: f64,
    pub packets_sent_median: f64,
    pub runs: usize,
    pub failures: usize,
    /// Only set by countermeasure sweeps.
    pub overhead_pct: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<ResultsRow>,
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else if v.is_nan() {
        "nan".to_string()
    } else {
        "inf".to_string()
    }
}

impl ResultsRow {
    fn cells(&self, overhead: bool) -> Vec<String> {
        let mut c = vec![
            self.scenario.clone(),
            self.method.to_string(),
            num(self.mdape_pct),
            num(self.err_p25),
            num(self.err_p75),
            num(self.packets_sent_median),
            self.runs.to_string(),
            self.failures.to_string(),
        ];
        if overhead {
            c.push(self.overhead_pct.map_or_else(String::new, num));
        }
        c
    }
}

impl ResultsTable {
    pub fn row(&self, scenario: &str, method: Estimator) -> Option<&ResultsRow> {
        self.rows.iter().find(|r| r.scenario == scenario && r.method == method)
    }

    fn has_overhead(&self) -> bool {
        self.rows.iter().any(|r| r.overhead_pct.is_some())
    }

    fn header(&self) -> Vec<&'static str> {
        let mut h: Vec<&str> = RESULTS_HEADER.split(',').collect();
        if self.has_overhead() {
            h.push("overhead_pct");
        }
        h
    }

    pub fn to_csv(&self) -> String {
        let overhead = self.has_overhead();
        let mut out = self.header().join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.cells(overhead).join(","));
            out.push('\n');
        }
        out
    }

    /// Space-aligned table for terminals.
    pub fn to_table(&self) -> String {
        let overhead = self.has_overhead();
        let header: Vec<String> = self.header().iter().map(|s| s.to_string()).collect();
        let body: Vec<Vec<String>> = self.rows.iter().map(|r| r.cells(overhead)).collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|i| body.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in std::iter::once(&header).chain(&body) {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(overhead: Option<f64>) -> ResultsRow {
        ResultsRow {
            scenario: "SUR-RL".into(),
            method: Estimator::Nfty,
            mdape_pct: 1.5,
            err_p25: 0.5,
            err_p75: f64::INFINITY,
            packets_sent_median: 5_000.0,
            runs: 100,
            failures: 0,
            overhead_pct: overhead,
        }
    }

    #[test]
    fn csv_header_and_row() {
        let t = ResultsTable { rows: vec![row(None)] };
        assert_eq!(
            t.to_csv(),
            format!("{RESULTS_HEADER}\nSUR-RL,NFTY,1.5000,0.5000,inf,5000.0000,100,0\n")
        );
    }

    #[test]
    fn overhead_column_when_present() {
        let t = ResultsTable { rows: vec![row(Some(12.0))] };
        assert!(t.to_csv().starts_with(&format!("{RESULTS_HEADER},overhead_pct\n")));
        assert!(t.to_table().lines().next().unwrap().ends_with("overhead_pct"));
    }
}
