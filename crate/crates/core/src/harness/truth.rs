use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nfmodels::NfConfig;
use crate::simcore::{run_flood, FloodSpec, ScenarioConfig};
use crate::time::SimTime;

/// Closed-form capacity: threads over per-packet service time at top speed.
pub fn analytic_capacity(nf: &NfConfig) -> f64 {
    nf.analytic_capacity_pps()
}

/// Knobs of the flood search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloodSearch {
    pub start_pps: f64,
    /// Allowed shortfall of delivered over offered packets in the steady window.
    pub loss_tolerance: f64,
    /// Bisection stops at this width relative to the upper bound.
    pub rel_width: f64,
    pub reps: usize,
    /// Upper limit of the bracketing phase, as a multiple of the link packet rate.
    pub link_headroom: f64,
}

impl Default for FloodSearch {
    fn default() -> Self {
        FloodSearch { start_pps: 1_000.0, loss_tolerance: 0.001, rel_width: 0.0005, reps: 5, link_headroom: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub capacity_pps: f64,
    /// Per-repetition results, in seed order.
    pub reps: Vec<f64>,
    /// The link, not the NF, limited throughput.
    pub link_limited: bool,
    pub diagnostics: BTreeMap<String, String>,
}

/// Flood length for a given rate: long enough for the governor to settle,
/// short enough that very fast rates stay cheap.
fn flood_spec(nf: &NfConfig, rate: f64) -> FloodSpec {
    let ns = (60_000.0 / rate * 1e9).clamp(40e6, 250e6) as u64;
    let mut spec = FloodSpec::balanced(nf, rate, SimTime(ns));
    spec.warmup = SimTime(ns * 2 / 5);
    spec
}

fn overloaded(scenario: &ScenarioConfig, rate: f64, seed: u64, tol: f64) -> Result<bool> {
    let stats = run_flood(scenario, &flood_spec(&scenario.nf, rate), seed)?;
    Ok(stats.overloaded(tol))
}

fn search_once(scenario: &ScenarioConfig, cfg: &FloodSearch, seed: u64, ceiling: f64) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = cfg.start_pps;
    while !overloaded(scenario, hi, seed, cfg.loss_tolerance)? {
        lo = hi;
        hi *= 2.0;
        if hi > ceiling {
            if overloaded(scenario, ceiling, seed, cfg.loss_tolerance)? {
                hi = ceiling;
                break;
            }
            return Err(Error::GroundTruth(format!(
                "no loss up to {ceiling:.0} pps; widen the search bounds"
            )));
        }
    }
    while hi - lo > cfg.rel_width * hi {
        let mid = 0.5 * (lo + hi);
        if overloaded(scenario, mid, seed, cfg.loss_tolerance)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if lo == 0.0 {
        return Err(Error::GroundTruth(format!(
            "overloaded already at {} pps; lower the start rate",
            cfg.start_pps
        )));
    }
    Ok(lo)
}

/// Ground truth by flooding: bracket then bisect on the highest rate the NF
/// forwards without sustained loss, repeated with seeds `seed..seed+reps`,
/// median returned. Countermeasures are stripped; the truth is the NF's.
pub fn ground_truth_flood(scenario: &ScenarioConfig, seed: u64) -> Result<GroundTruth> {
    ground_truth_flood_with(scenario, seed, &FloodSearch::default())
}

pub fn ground_truth_flood_with(scenario: &ScenarioConfig, seed: u64, cfg: &FloodSearch) -> Result<GroundTruth> {
    scenario.validate()?;
    if cfg.reps == 0 {
        return Err(Error::config("flood.reps", "must be at least 1"));
    }
    let mut s = scenario.clone();
    s.nf.countermeasures.clear();
    let link_pps = s.link.packet_rate(64);
    let ceiling = link_pps * cfg.link_headroom;
    let reps = (0..cfg.reps as u64)
        .map(|r| search_once(&s, cfg, seed.wrapping_add(r), ceiling))
        .collect::<Result<Vec<f64>>>()?;
    let mut sorted = reps.clone();
    sorted.sort_by(f64::total_cmp);
    let capacity = sorted[sorted.len() / 2];
    let link_limited = capacity >= 0.99 * link_pps;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("link_pps".to_string(), format!("{link_pps:.0}"));
    if link_limited {
        diagnostics.insert(
            "warning".to_string(),
            "throughput bounded by the link; the NF is not the bottleneck".to_string(),
        );
    }
    Ok(GroundTruth { capacity_pps: capacity, reps, link_limited, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_examples() {
        assert_eq!(analytic_capacity(&NfConfig::fixed(5_000)), 200_000.0);
        let mut nf = NfConfig::fixed(5_000);
        nf.threads_k = 2;
        assert_eq!(analytic_capacity(&nf), 400_000.0);
    }

    #[test]
    fn flood_matches_fixed_nf() {
        let s = ScenarioConfig::with_nf(NfConfig::fixed(5_000));
        let cfg = FloodSearch { reps: 1, ..FloodSearch::default() };
        let gt = ground_truth_flood_with(&s, 7, &cfg).unwrap();
        assert!((gt.capacity_pps / 200_000.0 - 1.0).abs() < 0.01, "{}", gt.capacity_pps);
        assert!(!gt.link_limited);
    }

    #[test]
    fn pure_forwarder_is_link_limited() {
        let s = ScenarioConfig::with_nf(NfConfig::fixed(0));
        let cfg = FloodSearch { reps: 1, rel_width: 0.005, ..FloodSearch::default() };
        let gt = ground_truth_flood_with(&s, 1, &cfg).unwrap();
        assert!(gt.link_limited, "{gt:?}");
    }
}
