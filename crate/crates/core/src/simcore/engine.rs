use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use super::{IcmpReplyRecord, NoiseModel, PacketRecord, ScenarioConfig, Trace};
use crate::error::Result;
use crate::nfmodels::{apply_countermeasures, run_nf, EgressEvent, IcmpGenerator, NfInput};
use crate::probegen::ProbeSpec;
use crate::rng::{keyed_unit, stage_rng, stage_seed, STAGE_COUNTERMEASURE, STAGE_NOISE};
use crate::time::SimTime;

pub(crate) const DROP_NF_INGRESS: &str = "nf_ingress";
pub(crate) const DROP_TTL_EXPIRED: &str = "ttl_expired";

/// Post-NF path jitter: log-normal per packet plus millisecond-granular
/// cross-traffic bursts. FIFO order is preserved.
pub(crate) struct PathNoise {
    jitter: Option<LogNormal<f64>>,
    constant_ns: f64,
    burst_seed: u64,
    burst_prob: f64,
    burst_extra: u64,
    rng: ChaCha8Rng,
    last_out: u64,
}

impl PathNoise {
    pub fn new(model: &NoiseModel, seed: u64) -> Option<Self> {
        if !model.enabled {
            return None;
        }
        let m = model.jitter_mean_ns;
        let s = model.jitter_sigma_ns;
        let jitter = (m > 0.0 && s > 0.0).then(|| {
            let var = (1.0 + (s * s) / (m * m)).ln();
            LogNormal::new(m.ln() - var / 2.0, var.sqrt()).expect("valid log-normal")
        });
        Some(PathNoise {
            jitter,
            constant_ns: if s == 0.0 { m } else { 0.0 },
            burst_seed: stage_seed(seed, "noise_burst"),
            burst_prob: model.burst_prob_per_ms,
            burst_extra: model.burst_extra_ns,
            rng: stage_rng(seed, STAGE_NOISE),
            last_out: 0,
        })
    }

    pub fn apply(&mut self, t: u64) -> u64 {
        let mut delay = match &self.jitter {
            Some(d) => d.sample(&mut self.rng).round() as u64,
            None => self.constant_ns.round() as u64,
        };
        if self.burst_prob > 0.0 && keyed_unit(self.burst_seed, t / 1_000_000) < self.burst_prob {
            delay += self.burst_extra;
        }
        let out = (t + delay).max(self.last_out);
        self.last_out = out;
        out
    }
}

/// Runs one probe through the scenario and returns the full trace.
pub fn run_simulation(scenario: &ScenarioConfig, probe: &ProbeSpec, seed: u64) -> Result<Trace> {
    scenario.validate()?;
    probe.validate(&scenario.link)?;

    let link = &scenario.link;
    let router = &scenario.router;
    let n = probe.length;
    let t_tr = link.transmission_ns(probe.size_bytes);
    let prop = link.propagation_ns;
    let fwd = router.forward_ns;
    let nf_hop = link.nf_hop();
    let total_routers = link.total_routers();

    let mut packets: Vec<PacketRecord> = scenario
        .sender
        .send_times(n, probe.rate_pps)
        .into_iter()
        .enumerate()
        .map(|(i, t_sent)| PacketRecord {
            packet_id: i as u64,
            flow_id: probe.flow_of(i),
            kind: probe.kind,
            size_bytes: probe.size_bytes,
            ttl: probe.ttl_of(i),
            t_sent,
            t_nf_in: None,
            t_nf_out: None,
            t_recv: None,
            thread_id: None,
            dropped_at: None,
        })
        .collect();

    let expiry_hop = |ttl: u8| -> Option<usize> {
        let h = ttl as usize;
        (h >= 1 && h <= total_routers).then_some(h)
    };
    let mut icmp: Vec<Option<IcmpGenerator>> = vec![None; total_routers + 1];
    let mut replies: Vec<IcmpReplyRecord> = Vec::new();
    let mut expire = |hop: usize, packet_id: u64, t_at_router: u64| {
        let gen = icmp[hop].get_or_insert_with(|| IcmpGenerator::new(router));
        if let Some(done) = gen.expire(t_at_router) {
            replies.push(IcmpReplyRecord {
                orig_packet_id: packet_id,
                router_hop: hop,
                t_reply_arrival: SimTime(done + hop as u64 * prop),
            });
        }
    };

    // Sender NIC serialization, then the links and routers in front of the NF.
    let mut nf_inputs = Vec::with_capacity(n);
    let mut nic_free = 0u64;
    for p in &mut packets {
        let wire_out = p.t_sent.0.max(nic_free) + t_tr;
        nic_free = wire_out;
        match expiry_hop(p.ttl) {
            Some(h) if h <= nf_hop => {
                let at_router = wire_out + h as u64 * prop + (h as u64 - 1) * fwd;
                p.dropped_at = Some(DROP_TTL_EXPIRED.to_string());
                expire(h, p.packet_id, at_router);
            }
            _ => {
                let t_in = SimTime(wire_out + (nf_hop as u64 + 1) * prop + nf_hop as u64 * fwd);
                p.t_nf_in = Some(t_in);
                nf_inputs.push(NfInput { packet_id: p.packet_id, flow_id: p.flow_id, t_in });
            }
        }
    }
    nf_inputs.sort_by_key(|x| (x.t_in, x.packet_id));

    let nf_out = run_nf(&scenario.nf, &nf_inputs, seed);
    let mut egress = Vec::with_capacity(nf_inputs.len());
    for (slot, input) in nf_inputs.iter().enumerate() {
        let p = &mut packets[input.packet_id as usize];
        p.thread_id = Some(nf_out.thread[slot]);
        match nf_out.done[slot] {
            Some(t) => egress.push(EgressEvent { packet_id: p.packet_id, flow_id: p.flow_id, t }),
            None => p.dropped_at = Some(DROP_NF_INGRESS.to_string()),
        }
    }
    egress.sort_by_key(|e| (e.t, e.packet_id));
    let mut cm_rng = stage_rng(seed, STAGE_COUNTERMEASURE);
    let egress = apply_countermeasures(
        &scenario.nf.countermeasures,
        egress,
        scenario.nf.analytic_capacity_pps(),
        &mut cm_rng,
    );

    // Egress serialization, path noise, routers behind the NF, receiver.
    let mut noise = PathNoise::new(&scenario.noise, seed);
    let mut wire_free = 0u64;
    let after = link.hop_count_after_nf as u64;
    for ev in egress {
        let p = &mut packets[ev.packet_id as usize];
        p.t_nf_out = Some(ev.t);
        let wire_out = ev.t.0.max(wire_free) + t_tr;
        wire_free = wire_out;
        let t = match noise.as_mut() {
            Some(nz) => nz.apply(wire_out),
            None => wire_out,
        };
        match expiry_hop(p.ttl) {
            Some(h) => {
                let k = (h - nf_hop) as u64;
                p.dropped_at = Some(DROP_TTL_EXPIRED.to_string());
                expire(h, p.packet_id, t + k * prop + (k - 1) * fwd);
            }
            None => {
                let arrival = SimTime(t + (after + 1) * prop + after * fwd);
                p.t_recv = Some(scenario.receiver.timestamp(arrival));
            }
        }
    }

    replies.sort_by_key(|r| (r.t_reply_arrival, r.orig_packet_id));
    Ok(Trace {
        packets,
        icmp_replies: replies,
        scenario_digest: scenario.digest(),
        seed,
        nf_levels: nf_out.levels,
        nf_top_level: scenario.nf.freq_levels.len() - 1,
    })
}

