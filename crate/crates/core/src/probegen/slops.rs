use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dispersion::{EstimateReport, Estimator};
use crate::error::{Error, Result};
use crate::rng::mix64;
use crate::simcore::{run_simulation, ScenarioConfig};

use super::{FlowPolicy, ProbeSpec, DEFAULT_PROBE_SIZE, DEFAULT_TTL};

/// Pathload's non-increasing bounds for PCT and PDT.
pub const PCT_LOW: f64 = 0.54;
pub const PDT_LOW: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlopsParams {
    pub rate_min_pps: f64,
    pub rate_max_pps: f64,
    pub initial_rate_pps: f64,
    pub stop_width_pps: f64,
    /// Packets per probing stream.
    pub stream_len: usize,
    /// Groups used by the trend test.
    pub trend_groups: usize,
    pub pct_threshold: f64,
    pub pdt_threshold: f64,
    /// Below this PCT the stream counts as non-increasing.
    pub pct_low: f64,
    /// Below this PDT the stream counts as non-increasing.
    pub pdt_low: f64,
}

impl Default for SlopsParams {
    fn default() -> Self {
        SlopsParams {
            rate_min_pps: 0.0,
            rate_max_pps: 500_000.0,
            initial_rate_pps: 250_000.0,
            stop_width_pps: 1_000.0,
            stream_len: 100,
            trend_groups: 10,
            pct_threshold: 0.66,
            pdt_threshold: 0.55,
            pct_low: PCT_LOW,
            pdt_low: PDT_LOW,
        }
    }
}

impl SlopsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_min_pps >= 0.0
            && self.rate_min_pps < self.initial_rate_pps
            && self.initial_rate_pps < self.rate_max_pps)
        {
            return Err(Error::config(
                "slops.initial_rate_pps",
                "need rate_min_pps < initial_rate_pps < rate_max_pps",
            ));
        }
        if !(self.stop_width_pps > 0.0) {
            return Err(Error::config("slops.stop_width_pps", "must be positive"));
        }
        if !(self.pct_low <= self.pct_threshold && self.pdt_low <= self.pdt_threshold) {
            return Err(Error::config("slops.pct_low", "low bounds must not exceed the thresholds"));
        }
        if self.trend_groups < 2 {
            return Err(Error::config("slops.trend_groups", "must be at least 2"));
        }
        if self.stream_len < self.trend_groups {
            return Err(Error::config("slops.stream_len", "must be at least trend_groups"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Increasing,
    NotIncreasing,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pathload trend test on relative one-way delays with its default
/// non-increasing bounds. See [`owd_trend_with`].
pub fn owd_trend(owds: &[f64], groups: usize, pct_th: f64, pdt_th: f64) -> Trend {
    owd_trend_with(owds, groups, pct_th, pdt_th, PCT_LOW, PDT_LOW)
}

/// The series is cut into `groups` equal groups (the remainder is dropped
/// from the front) and the group medians feed PCT, the fraction of rising
/// steps, and PDT, net rise over total variation. Each metric votes
/// increasing above its threshold and non-increasing below its low bound.
/// The stream is increasing when one metric votes so and the other does
/// not vote against. Low bounds of 0 and -1 reduce this to a plain
/// either-metric rule.
pub fn owd_trend_with(owds: &[f64], groups: usize, pct_th: f64, pdt_th: f64, pct_low: f64, pdt_low: f64) -> Trend {
    assert!(groups >= 2 && owds.len() >= groups, "owd_trend needs len >= groups >= 2");
    let size = owds.len() / groups;
    let skip = owds.len() - size * groups;
    let medians: Vec<f64> = owds[skip..]
        .chunks_exact(size)
        .map(|c| median(&mut c.to_vec()))
        .collect();
    let ups = medians.windows(2).filter(|w| w[1] > w[0]).count();
    let pct = ups as f64 / (groups - 1) as f64;
    let total: f64 = medians.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let pdt = if total > 0.0 {
        (medians[groups - 1] - medians[0]) / total
    } else {
        0.0
    };
    let vote = |v: f64, hi: f64, lo: f64| if v > hi { 1 } else if v < lo { -1 } else { 0 };
    let (p, d) = (vote(pct, pct_th, pct_low), vote(pdt, pdt_th, pdt_low));
    if (p == 1 && d != -1) || (d == 1 && p != -1) {
        Trend::Increasing
    } else {
        Trend::NotIncreasing
    }
}

/// Rate-based baseline: binary search on the stream rate, one simulated
/// stream per step, until the rate interval is narrower than the stop width.
pub fn slops_search(scenario: &ScenarioConfig, params: &SlopsParams, seed: u64) -> Result<EstimateReport<f64>> {
    params.validate()?;
    let (mut lo, mut hi) = (params.rate_min_pps, params.rate_max_pps);
    let mut rate = params.initial_rate_pps;
    let mut iterations = 0usize;
    let mut increasing_steps = 0usize;
    while hi - lo > params.stop_width_pps {
        let probe = ProbeSpec {
            length: params.stream_len,
            rate_pps: rate,
            kind: scenario.packet_kind,
            size_bytes: DEFAULT_PROBE_SIZE,
            flow_policy: FlowPolicy::SingleFlow,
            ttl_plan: None,
            default_ttl: DEFAULT_TTL,
        };
        let trace = run_simulation(scenario, &probe, mix64(seed ^ ((iterations as u64) << 32)))?;
        let owds: Vec<f64> = trace
            .received()
            .map(|p| p.t_recv.map_or(0, |t| t.0) as f64 - p.t_sent.0 as f64)
            .collect();
        // Losses inside a stream mean the rate overran the path.
        let lossy = owds.len() < params.stream_len;
        let trend = if lossy || owds.len() < params.trend_groups {
            Trend::Increasing
        } else {
            let base = owds.iter().copied().fold(f64::INFINITY, f64::min);
            let rel: Vec<f64> = owds.iter().map(|d| d - base).collect();
            owd_trend_with(&rel, params.trend_groups, params.pct_threshold, params.pdt_threshold, params.pct_low, params.pdt_low)
        };
        if trend == Trend::Increasing {
            hi = rate;
            increasing_steps += 1;
        } else {
            lo = rate;
        }
        iterations += 1;
        rate = 0.5 * (lo + hi);
    }
    let capacity = 0.5 * (lo + hi);
    let hit_upper = params.rate_max_pps - lo <= params.stop_width_pps;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("iterations".to_string(), iterations.to_string());
    diagnostics.insert("interval_min_pps".to_string(), format!("{lo}"));
    diagnostics.insert("interval_max_pps".to_string(), format!("{hi}"));
    diagnostics.insert("increasing_steps".to_string(), increasing_steps.to_string());
    diagnostics.insert("hit_upper_bound".to_string(), hit_upper.to_string());
    Ok(EstimateReport {
        capacity_pps: capacity,
        delta_star_ns: 1e9 / capacity,
        method: Estimator::Slops,
        segmentation: None,
        packets_sent: iterations * params.stream_len,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nfmodels::NfConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn th() -> (f64, f64) {
        (0.66, 0.55)
    }

    #[test]
    fn ramp_and_constant() {
        let ramp: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(owd_trend(&ramp, 10, th().0, th().1), Trend::Increasing);
        assert_eq!(owd_trend(&[3.0; 100], 10, th().0, th().1), Trend::NotIncreasing);
    }

    #[test]
    fn iid_noise_rarely_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut hits = 0;
        for _ in 0..1_000 {
            let s: Vec<f64> = (0..100).map(|_| normal.sample(&mut rng)).collect();
            if owd_trend(&s, 10, th().0, th().1) == Trend::Increasing {
                hits += 1;
            }
        }
        assert!(hits < 100, "{hits} of 1000 noise series flagged increasing");
    }

    #[test]
    fn either_metric_rule_is_reachable() {
        // PCT 5/9 sits in the grey band, PDT is 1: increasing under the
        // either-metric rule and under the default rule alike.
        let m = [0.0, 1.0, 0.5, 2.0, 1.5, 3.0, 2.5, 4.0, 3.5, 5.0];
        let owds: Vec<f64> = m.iter().flat_map(|&v| std::iter::repeat_n(v, 10)).collect();
        assert_eq!(owd_trend_with(&owds, 10, 0.66, 0.55, 0.0, -1.0), Trend::Increasing);
        assert_eq!(owd_trend(&owds, 10, 0.66, 0.55), Trend::Increasing);
        // One late jump: PDT 1, but PCT 1/9 votes against.
        let m = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let owds: Vec<f64> = m.iter().flat_map(|&v| std::iter::repeat_n(v, 10)).collect();
        assert_eq!(owd_trend_with(&owds, 10, 0.66, 0.55, 0.0, -1.0), Trend::Increasing);
        assert_eq!(owd_trend(&owds, 10, 0.66, 0.55), Trend::NotIncreasing);
    }

    #[test]
    fn converges_on_single_thread() {
        let s = ScenarioConfig::with_nf(NfConfig::fixed(4_978));
        let truth = s.nf.analytic_capacity_pps();
        let r = slops_search(&s, &SlopsParams::default(), 1).unwrap();
        let lo: f64 = r.diagnostics["interval_min_pps"].parse().unwrap();
        let hi: f64 = r.diagnostics["interval_max_pps"].parse().unwrap();
        assert!(lo <= truth && truth <= hi, "[{lo}, {hi}] misses {truth}");
        assert!(hi - lo <= 1_000.0);
        assert_eq!(r.diagnostics["iterations"], "9");
        assert_eq!(r.packets_sent, 900);
    }

    #[test]
    fn clamps_at_upper_bound() {
        let s = ScenarioConfig::with_nf(NfConfig::fixed(1_667));
        let r = slops_search(&s, &SlopsParams::default(), 1).unwrap();
        assert_eq!(r.diagnostics["hit_upper_bound"], "true");
        assert!(r.capacity_pps > 499_000.0);
    }

    #[test]
    fn rejects_bad_params() {
        let p = SlopsParams { initial_rate_pps: 600_000.0, ..SlopsParams::default() };
        assert!(p.validate().is_err());
    }
}
