//! Deterministic discrete-event model of the probed path.
//!
//! A run moves every probe packet through sender serialization, the links
//! and routers before the NF, the NF itself, the countermeasure stages,
//! egress serialization, path noise, the routers behind the NF and finally
//! the receiver. Packets whose TTL runs out at a router turn into
//! TTL-exceeded replies that travel back to the sender.
//!
//! All timestamps are integer nanoseconds, and a `(scenario, probe, seed)`
//! triple always yields the same [`Trace`].

mod dump;
mod engine;
mod flood;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nfmodels::{LevelChange, NfConfig, ReceiverConfig, RouterConfig, SenderConfig};
use crate::probegen::PacketKind;
use crate::time::SimTime;

pub use dump::{read_trace, write_trace};
pub use engine::run_simulation;
pub use flood::{balanced_flows, run_flood, FloodSpec, FloodStats};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub packet_id: u64,
    pub flow_id: u64,
    pub kind: PacketKind,
    pub size_bytes: u32,
    pub ttl: u8,
    pub t_sent: SimTime,
    pub t_nf_in: Option<SimTime>,
    pub t_nf_out: Option<SimTime>,
    pub t_recv: Option<SimTime>,
    pub thread_id: Option<u32>,
    pub dropped_at: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IcmpReplyRecord {
    pub orig_packet_id: u64,
    pub router_hop: usize,
    pub t_reply_arrival: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkModel {
    pub capacity_bps: f64,
    /// Propagation delay of each link along the path.
    pub propagation_ns: u64,
    pub hop_count_before_nf: usize,
    pub hop_count_after_nf: usize,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel {
            capacity_bps: 10e9,
            propagation_ns: 2_000,
            hop_count_before_nf: 2,
            hop_count_after_nf: 6,
        }
    }
}

impl LinkModel {
    /// Serialization time of one packet, at least 1 ns.
    pub fn transmission_ns(&self, size_bytes: u32) -> u64 {
        ((size_bytes as f64 * 8.0 * 1e9 / self.capacity_bps).round() as u64).max(1)
    }

    /// Packets per second the link can carry at `size_bytes`.
    pub fn packet_rate(&self, size_bytes: u32) -> f64 {
        1e9 / self.transmission_ns(size_bytes) as f64
    }

    /// Hop index of the last router in front of the NF. TTLs at or below it
    /// expire before the NF sees the packet.
    pub fn nf_hop(&self) -> usize {
        self.hop_count_before_nf
    }

    pub fn total_routers(&self) -> usize {
        self.hop_count_before_nf + self.hop_count_after_nf
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.capacity_bps > 0.0) {
            return Err(Error::config("link.capacity_bps", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub enabled: bool,
    /// Mean of the log-normal per-packet jitter behind the NF.
    pub jitter_mean_ns: f64,
    pub jitter_sigma_ns: f64,
    /// Chance that a given millisecond carries a cross-traffic burst.
    pub burst_prob_per_ms: f64,
    pub burst_extra_ns: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            enabled: false,
            jitter_mean_ns: 2_000.0,
            jitter_sigma_ns: 2_000.0,
            burst_prob_per_ms: 0.02,
            burst_extra_ns: 20_000,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.jitter_mean_ns >= 0.0) {
            return Err(Error::config("noise.jitter_mean_ns", "must be non-negative"));
        }
        if !(self.jitter_sigma_ns >= 0.0) {
            return Err(Error::config("noise.jitter_sigma_ns", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.burst_prob_per_ms) {
            return Err(Error::config("noise.burst_prob_per_ms", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    /// Packet type the NF's capacity is defined for.
    #[serde(default)]
    pub packet_kind: PacketKind,
    #[serde(default)]
    pub link: LinkModel,
    pub nf: NfConfig,
    #[serde(default)]
    pub router: RouterConfig,
    #[serde(default)]
    pub receiver: ReceiverConfig,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub sender: SenderConfig,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    /// Minimal path around `nf`: 10 Gb/s links, default router, exact
    /// receiver, no noise.
    pub fn with_nf(nf: NfConfig) -> Self {
        ScenarioConfig {
            name: String::new(),
            packet_kind: PacketKind::Udp,
            link: LinkModel::default(),
            nf,
            router: RouterConfig::default(),
            receiver: ReceiverConfig::default(),
            noise: NoiseModel::default(),
            sender: SenderConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        self.nf.validate()?;
        self.router.validate()?;
        self.noise.validate()?;
        self.sender.validate()
    }

    /// SHA-256 over the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to toml")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    /// One record per probe packet, ordered by `packet_id`.
    pub packets: Vec<PacketRecord>,
    /// TTL-exceeded replies in arrival order at the sender.
    pub icmp_replies: Vec<IcmpReplyRecord>,
    pub scenario_digest: String,
    pub seed: u64,
    /// Frequency level changes of the NF during the run, starting at level 0.
    #[serde(default)]
    pub nf_levels: Vec<LevelChange>,
    #[serde(default)]
    pub nf_top_level: usize,
}

impl Trace {
    pub fn received(&self) -> impl Iterator<Item = &PacketRecord> {
        self.packets.iter().filter(|p| p.t_recv.is_some())
    }

    pub fn max_nf_level(&self) -> usize {
        self.nf_levels.iter().map(|c| c.level).max().unwrap_or(0)
    }

    /// Whether the NF ran at its top frequency at any point of the run.
    pub fn reached_top_frequency(&self) -> bool {
        self.max_nf_level() == self.nf_top_level
    }
}
