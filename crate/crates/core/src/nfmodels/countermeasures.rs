use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Gcra;
use crate::error::{Error, Result};
use crate::time::SimTime;

/// Operator-side defenses deployed at the NF egress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CountermeasureConfig {
    /// Uniform extra delay in `[0, max_ns]`, independent per packet.
    RandomDelay { max_ns: u64 },
    /// Hold packets and release them together on interval boundaries.
    ExtraBatch { interval_ns: u64 },
    /// Spray each flow round-robin over `queues` FIFO sub-queues, each
    /// adding its own uniform delay in `[0, jitter_max_ns]`.
    ReorderSpray { queues: usize, jitter_max_ns: u64 },
    /// Per-flow token-bucket shaping to `fraction` of the NF capacity.
    RateShape { fraction: f64, burst_pkts: u32 },
    /// Require `sustain_ticks` consecutive busy governor ticks per step up.
    Underclock { sustain_ticks: u32 },
}

/// Extra time an under-clocked governor waits per step up.
pub const DEFAULT_UNDERCLOCK_NS: u64 = 100_000_000;

impl CountermeasureConfig {
    /// Under-clocking by [`DEFAULT_UNDERCLOCK_NS`] at the default governor tick.
    pub fn default_underclock() -> Self {
        CountermeasureConfig::Underclock {
            sustain_ticks: (DEFAULT_UNDERCLOCK_NS / super::governor::DEFAULT_TICK_NS) as u32,
        }
    }

    /// Shaping to `fraction` of capacity without bursts.
    pub fn rate_shape(fraction: f64) -> Self {
        CountermeasureConfig::RateShape { fraction, burst_pkts: 1 }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        let bad = |what: &str| Err(Error::config(format!("{field}.{what}"), "must be positive"));
        match *self {
            CountermeasureConfig::RandomDelay { .. } => Ok(()),
            CountermeasureConfig::ExtraBatch { interval_ns: 0 } => bad("interval_ns"),
            CountermeasureConfig::ReorderSpray { queues: 0, .. } => bad("queues"),
            CountermeasureConfig::RateShape { fraction, .. } if !(fraction > 0.0 && fraction < 1.0) => {
                Err(Error::config(format!("{field}.fraction"), "must lie in (0, 1)"))
            }
            CountermeasureConfig::RateShape { burst_pkts: 0, .. } => bad("burst_pkts"),
            CountermeasureConfig::Underclock { sustain_ticks: 0 } => bad("sustain_ticks"),
            _ => Ok(()),
        }
    }

    /// Short label used in result tables.
    pub fn label(&self) -> String {
        match *self {
            CountermeasureConfig::RandomDelay { max_ns } => format!("random_delay({max_ns}ns)"),
            CountermeasureConfig::ExtraBatch { interval_ns } => format!("extra_batch({interval_ns}ns)"),
            CountermeasureConfig::ReorderSpray { queues, jitter_max_ns } => {
                format!("reorder_spray({queues}q,{jitter_max_ns}ns)")
            }
            CountermeasureConfig::RateShape { fraction, burst_pkts } => {
                format!("rate_shape({fraction},{burst_pkts})")
            }
            CountermeasureConfig::Underclock { sustain_ticks } => format!("underclock({sustain_ticks})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EgressEvent {
    pub packet_id: u64,
    pub flow_id: u64,
    pub t: SimTime,
}

/// Passes the NF egress stream through the configured countermeasures in
/// order. Input and output are sorted by `(t, packet_id)`.
pub fn apply_countermeasures(
    cms: &[CountermeasureConfig],
    mut stream: Vec<EgressEvent>,
    nf_capacity_pps: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<EgressEvent> {
    for cm in cms {
        match *cm {
            CountermeasureConfig::RandomDelay { max_ns } => {
                if max_ns == 0 {
                    continue;
                }
                for ev in &mut stream {
                    ev.t += rng.random_range(0..=max_ns);
                }
            }
            CountermeasureConfig::ExtraBatch { interval_ns } => {
                for ev in &mut stream {
                    ev.t = ev.t.ceil_to(interval_ns);
                }
            }
            CountermeasureConfig::ReorderSpray { queues, jitter_max_ns } => {
                let mut per_flow: HashMap<u64, usize> = HashMap::new();
                let mut free_at = vec![0u64; queues];
                for ev in &mut stream {
                    let c = per_flow.entry(ev.flow_id).or_insert(0);
                    let q = *c % queues;
                    *c += 1;
                    let jitter = if jitter_max_ns > 0 { rng.random_range(0..=jitter_max_ns) } else { 0 };
                    let t = (ev.t.0 + jitter).max(free_at[q]);
                    free_at[q] = t;
                    ev.t = SimTime(t);
                }
            }
            CountermeasureConfig::RateShape { fraction, burst_pkts } => {
                let rate = fraction * nf_capacity_pps;
                let mut buckets: HashMap<u64, Gcra> = HashMap::new();
                for ev in &mut stream {
                    let g = buckets.entry(ev.flow_id).or_insert_with(|| Gcra::new(rate, burst_pkts));
                    ev.t = SimTime(g.shape(ev.t.0));
                }
            }
            CountermeasureConfig::Underclock { .. } => continue,
        }
        stream.sort_by_key(|e| (e.t, e.packet_id));
    }
    stream
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn stream(gap: u64, n: u64) -> Vec<EgressEvent> {
        (0..n)
            .map(|i| EgressEvent { packet_id: i, flow_id: 1, t: SimTime(1_000 + i * gap) })
            .collect()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    #[test]
    fn zero_random_delay_is_identity() {
        let s = stream(5_000, 50);
        let out = apply_countermeasures(&[CountermeasureConfig::RandomDelay { max_ns: 0 }], s.clone(), 2e5, &mut rng());
        assert_eq!(out, s);
    }

    #[test]
    fn random_delay_stays_within_bound() {
        let s = stream(5_000, 200);
        let out = apply_countermeasures(&[CountermeasureConfig::RandomDelay { max_ns: 50_000 }], s.clone(), 2e5, &mut rng());
        let orig: HashMap<u64, u64> = s.iter().map(|e| (e.packet_id, e.t.0)).collect();
        for e in &out {
            let d = e.t.0 - orig[&e.packet_id];
            assert!(d <= 50_000);
        }
    }

    #[test]
    fn extra_batch_releases_on_boundaries() {
        let out = apply_countermeasures(
            &[CountermeasureConfig::ExtraBatch { interval_ns: 300_000 }],
            stream(4_978, 500),
            2e5,
            &mut rng(),
        );
        assert!(out.iter().all(|e| e.t.0 % 300_000 == 0));
    }

    #[test]
    fn rate_shape_spaces_single_flow_and_never_drops() {
        let out = apply_countermeasures(
            &[CountermeasureConfig::RateShape { fraction: 0.2, burst_pkts: 1 }],
            stream(5_000, 100),
            200_000.0,
            &mut rng(),
        );
        assert_eq!(out.len(), 100);
        for w in out.windows(2) {
            assert_eq!(w[1].t.0 - w[0].t.0, 25_000);
        }
    }

    #[test]
    fn reorder_spray_can_reorder_within_flow() {
        let out = apply_countermeasures(
            &[CountermeasureConfig::ReorderSpray { queues: 4, jitter_max_ns: 40_000 }],
            stream(1_000, 200),
            2e5,
            &mut rng(),
        );
        assert_eq!(out.len(), 200);
        assert!(out.windows(2).any(|w| w[1].packet_id < w[0].packet_id));
    }

    #[test]
    fn validation_names_the_field() {
        let cm = CountermeasureConfig::RateShape { fraction: 1.5, burst_pkts: 1 };
        assert!(matches!(cm.validate("nf.countermeasures[0]"),
            Err(Error::Config { field, .. }) if field == "nf.countermeasures[0].fraction"));
    }
}
