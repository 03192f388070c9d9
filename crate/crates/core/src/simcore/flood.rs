use serde::{Deserialize, Serialize};

use super::ScenarioConfig;
use crate::error::{Error, Result};
use crate::nfmodels::{apply_countermeasures, assign_thread, run_nf, EgressEvent, NfConfig, NfInput, ThreadAssign};
use crate::rng::{stage_rng, STAGE_COUNTERMEASURE};
use crate::time::SimTime;

/// A constant-rate flood, the primitive behind the ground-truth search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodSpec {
    pub rate_pps: f64,
    pub duration: SimTime,
    /// Start of the steady-state window used for the in == out comparison.
    pub warmup: SimTime,
    /// Flow ids cycled over the flood packets.
    pub flows: Vec<u64>,
    pub size_bytes: u32,
}

impl FloodSpec {
    /// Flood spread evenly over all NF threads, with the first third of the
    /// duration treated as warm-up.
    pub fn balanced(nf: &NfConfig, rate_pps: f64, duration: SimTime) -> Self {
        FloodSpec {
            rate_pps,
            duration,
            warmup: SimTime(duration.0 / 3),
            flows: balanced_flows(nf, 16),
            size_bytes: 64,
        }
    }

    /// Flood carried by a single flow.
    pub fn single_flow(rate_pps: f64, duration: SimTime) -> Self {
        FloodSpec {
            rate_pps,
            duration,
            warmup: SimTime(duration.0 / 3),
            flows: vec![1],
            size_bytes: 64,
        }
    }
}

/// Flow ids that load every NF thread equally when cycled in order.
pub fn balanced_flows(nf: &NfConfig, per_thread: usize) -> Vec<u64> {
    let k = nf.threads_k.max(1);
    if nf.thread_assign == ThreadAssign::RoundRobin || k == 1 {
        return (1..=(k * per_thread) as u64).collect();
    }
    let mut buckets: Vec<Vec<u64>> = vec![Vec::new(); k];
    let mut flow = 1u64;
    while buckets.iter().any(|b| b.len() < per_thread) {
        let th = assign_thread(nf.thread_assign, 0, flow, k);
        if buckets[th].len() < per_thread {
            buckets[th].push(flow);
        }
        flow += 1;
    }
    (0..per_thread)
        .flat_map(|i| buckets.iter().map(move |b| b[i]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloodStats {
    pub sent: u64,
    /// Packets that left the NF before the flood ended.
    pub delivered: u64,
    pub dropped: u64,
    /// Packets still queued when the flood ended; they drain afterwards.
    pub in_flight: u64,
    /// `delivered / duration`.
    pub delivered_rate_pps: f64,
    /// Packets offered during the steady-state window.
    pub steady_offered: u64,
    /// Packets leaving the NF during the steady-state window.
    pub steady_delivered: u64,
}

impl FloodStats {
    /// The NF could not keep up: over the steady window it emitted fewer
    /// packets than it was offered, beyond `tolerance`.
    pub fn overloaded(&self, tolerance: f64) -> bool {
        (self.steady_delivered as f64) < self.steady_offered as f64 * (1.0 - tolerance)
    }
}

pub fn run_flood(scenario: &ScenarioConfig, spec: &FloodSpec, seed: u64) -> Result<FloodStats> {
    scenario.validate()?;
    if !(spec.rate_pps > 0.0) {
        return Err(Error::config("flood.rate_pps", "must be positive"));
    }
    if (spec.duration.0 as f64) < 10.0 * 1e9 / spec.rate_pps {
        return Err(Error::config("flood.duration", "must cover at least 10 packet intervals"));
    }
    if spec.flows.is_empty() {
        return Err(Error::config("flood.flows", "must not be empty"));
    }
    if spec.warmup >= spec.duration {
        return Err(Error::config("flood.warmup", "must end before the flood does"));
    }

    let link = &scenario.link;
    let t_tr = link.transmission_ns(spec.size_bytes);
    let nf_hop = link.nf_hop() as u64;
    let pre_nf = (nf_hop + 1) * link.propagation_ns + nf_hop * scenario.router.forward_ns;
    let interval = 1e9 / spec.rate_pps;
    let count = ((spec.duration.0 as f64) / interval).ceil() as u64;

    let mut inputs = Vec::with_capacity(count as usize);
    let mut steady_offered = 0u64;
    let mut nic_free = 0u64;
    for i in 0..count {
        let t_sent = (i as f64 * interval).round() as u64;
        if t_sent >= spec.duration.0 {
            break;
        }
        if t_sent >= spec.warmup.0 {
            steady_offered += 1;
        }
        let wire_out = t_sent.max(nic_free) + t_tr;
        nic_free = wire_out;
        inputs.push(NfInput {
            packet_id: i,
            flow_id: spec.flows[(i % spec.flows.len() as u64) as usize],
            t_in: SimTime(wire_out + pre_nf),
        });
    }

    let out = run_nf(&scenario.nf, &inputs, seed);
    let mut egress: Vec<EgressEvent> = inputs
        .iter()
        .zip(&out.done)
        .filter_map(|(p, d)| d.map(|t| EgressEvent { packet_id: p.packet_id, flow_id: p.flow_id, t }))
        .collect();
    egress.sort_by_key(|e| (e.t, e.packet_id));
    let mut rng = stage_rng(seed, STAGE_COUNTERMEASURE);
    let egress = apply_countermeasures(
        &scenario.nf.countermeasures,
        egress,
        scenario.nf.analytic_capacity_pps(),
        &mut rng,
    );

    let sent = inputs.len() as u64;
    let delivered = egress.iter().filter(|e| e.t < spec.duration).count() as u64;
    let steady_delivered = egress
        .iter()
        .filter(|e| e.t >= spec.warmup && e.t < spec.duration)
        .count() as u64;
    Ok(FloodStats {
        sent,
        delivered,
        dropped: out.dropped,
        in_flight: sent - delivered - out.dropped,
        delivered_rate_pps: delivered as f64 / spec.duration.as_secs_f64(),
        steady_offered,
        steady_delivered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nfmodels::CountermeasureConfig;

    fn scenario(base_ns: u64) -> ScenarioConfig {
        ScenarioConfig::with_nf(NfConfig::fixed(base_ns))
    }

    #[test]
    fn under_capacity_delivers_everything() {
        let s = scenario(5_000);
        let st = run_flood(&s, &FloodSpec::balanced(&s.nf, 100_000.0, SimTime::from_ms(200)), 1).unwrap();
        assert_eq!(st.dropped, 0);
        assert!((st.delivered_rate_pps - 100_000.0).abs() / 100_000.0 < 0.01);
        assert!(!st.overloaded(0.001));
        assert_eq!(st.sent, st.delivered + st.dropped + st.in_flight);
    }

    #[test]
    fn over_capacity_saturates_at_service_rate() {
        let s = scenario(5_000);
        let st = run_flood(&s, &FloodSpec::balanced(&s.nf, 400_000.0, SimTime::from_ms(1_000)), 1).unwrap();
        assert!((st.delivered_rate_pps - 200_000.0).abs() / 200_000.0 < 0.01, "{st:?}");
        assert!(st.dropped > 0);
        assert!(st.overloaded(0.001));
        assert_eq!(st.sent, st.delivered + st.dropped + st.in_flight);
    }

    #[test]
    fn exactly_at_capacity_has_no_sustained_drops() {
        let s = scenario(5_000);
        let st = run_flood(&s, &FloodSpec::balanced(&s.nf, 200_000.0, SimTime::from_ms(500)), 1).unwrap();
        assert_eq!(st.dropped, 0);
        assert!(!st.overloaded(0.001));
    }

    #[test]
    fn rate_shaping_caps_single_flow_without_drops() {
        let mut s = scenario(5_000);
        s.nf.countermeasures.push(CountermeasureConfig::RateShape { fraction: 0.2, burst_pkts: 1 });
        let st = run_flood(&s, &FloodSpec::single_flow(200_000.0, SimTime::from_ms(300)), 1).unwrap();
        assert_eq!(st.dropped, 0);
        assert!((st.delivered_rate_pps - 40_000.0).abs() / 40_000.0 < 0.02, "{st:?}");
    }

    #[test]
    fn balanced_flows_split_evenly_across_threads() {
        let mut nf = NfConfig::fixed(10_000);
        nf.threads_k = 3;
        let flows = balanced_flows(&nf, 8);
        let mut counts = [0usize; 3];
        for f in &flows {
            counts[assign_thread(nf.thread_assign, 0, *f, 3)] += 1;
        }
        assert_eq!(counts, [8, 8, 8]);
    }

    #[test]
    fn rejects_too_short_flood() {
        let s = scenario(5_000);
        let spec = FloodSpec::balanced(&s.nf, 1_000.0, SimTime::from_ms(5));
        assert!(matches!(run_flood(&s, &spec, 1), Err(Error::Config { field, .. }) if field == "flood.duration"));
    }
}
