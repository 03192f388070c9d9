//! Attacker-side probe construction: two-sided trains, one-sided TTL plans,
//! router-time estimation, TTL spacing, and the rate-based SLoPS baseline.

mod router_time;
mod slops;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::LinkModel;

pub use router_time::{estimate_router_time, ROUTER_TIME_PAIRS};
pub use slops::{owd_trend, owd_trend_with, slops_search, SlopsParams, Trend, PCT_LOW, PDT_LOW};

/// TTL that comfortably reaches any receiver in the modeled paths.
pub const DEFAULT_TTL: u8 = 64;
pub const DEFAULT_PROBE_SIZE: u32 = 64;
/// Flow id of single-flow probes.
pub const PROBE_FLOW: u64 = 1;
/// Routers between the NF and the router whose TTL-exceeded replies we use.
pub const ONE_SIDED_HOPS_PAST_NF: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PacketKind {
    #[default]
    #[serde(rename = "UDP")]
    Udp,
    #[serde(rename = "TCP_SYN")]
    TcpSyn,
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PacketKind::Udp => "UDP",
            PacketKind::TcpSyn => "TCP_SYN",
        })
    }
}

impl FromStr for PacketKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "UDP" | "udp" => Ok(PacketKind::Udp),
            "TCP_SYN" | "tcp_syn" | "syn" => Ok(PacketKind::TcpSyn),
            other => Err(Error::Parse(format!("unknown packet kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum FlowPolicy {
    #[default]
    SingleFlow,
    /// Packet `i` belongs to flow `1 + i mod n_flows`.
    Spray { n_flows: u64 },
}

/// Every `gap`-th packet, starting at 0, carries `expire_ttl`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TtlPlan {
    pub gap: usize,
    pub expire_ttl: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub length: usize,
    pub rate_pps: f64,
    #[serde(default)]
    pub kind: PacketKind,
    #[serde(default = "default_size")]
    pub size_bytes: u32,
    #[serde(default)]
    pub flow_policy: FlowPolicy,
    #[serde(default)]
    pub ttl_plan: Option<TtlPlan>,
    #[serde(default = "default_ttl")]
    pub default_ttl: u8,
}

fn default_size() -> u32 {
    DEFAULT_PROBE_SIZE
}

fn default_ttl() -> u8 {
    DEFAULT_TTL
}

impl ProbeSpec {
    pub fn with_kind(mut self, kind: PacketKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_size(mut self, size_bytes: u32) -> Self {
        self.size_bytes = size_bytes;
        self
    }

    pub fn flow_of(&self, i: usize) -> u64 {
        match self.flow_policy {
            FlowPolicy::SingleFlow => PROBE_FLOW,
            FlowPolicy::Spray { n_flows } => PROBE_FLOW + (i as u64 % n_flows.max(1)),
        }
    }

    pub fn ttl_of(&self, i: usize) -> u8 {
        match self.ttl_plan {
            Some(plan) if i.is_multiple_of(plan.gap) => plan.expire_ttl,
            _ => self.default_ttl,
        }
    }

    /// Packet ids whose TTL is set to expire, in order.
    pub fn marked_ids(&self) -> Vec<usize> {
        match self.ttl_plan {
            Some(plan) => (0..self.length).step_by(plan.gap).collect(),
            None => Vec::new(),
        }
    }

    pub fn validate(&self, link: &LinkModel) -> Result<()> {
        if self.length < 2 {
            return Err(Error::config("probe.length", "must be at least 2"));
        }
        if !(self.rate_pps > 0.0) {
            return Err(Error::config("probe.rate_pps", "must be positive"));
        }
        if self.size_bytes == 0 {
            return Err(Error::config("probe.size_bytes", "must be positive"));
        }
        if (self.default_ttl as usize) <= link.total_routers() {
            return Err(Error::config("probe.default_ttl", "does not reach the receiver"));
        }
        if let Some(plan) = self.ttl_plan {
            if plan.gap == 0 {
                return Err(Error::config("probe.ttl_plan.gap", "must be at least 1"));
            }
            check_expire_hop(link, plan.expire_ttl as usize)?;
        }
        Ok(())
    }
}

fn check_expire_hop(link: &LinkModel, hop: usize) -> Result<()> {
    if hop <= link.nf_hop() {
        return Err(Error::config(
            "probe.expire_hop",
            format!("hop {hop} is not past the NF (NF sits behind hop {})", link.nf_hop()),
        ));
    }
    if hop > link.total_routers() {
        return Err(Error::config(
            "probe.expire_hop",
            format!("hop {hop} is at or beyond the destination"),
        ));
    }
    Ok(())
}

/// Default expiry hop for one-sided probing on this path.
pub fn default_expire_hop(link: &LinkModel) -> usize {
    (link.nf_hop() + ONE_SIDED_HOPS_PAST_NF).min(link.total_routers())
}

/// Back-to-back train for an attacker who also controls the receiver.
pub fn build_two_sided_probe(length: usize, rate_pps: f64, flow_policy: FlowPolicy) -> Result<ProbeSpec> {
    if length < 2 {
        return Err(Error::Probe(format!("train needs at least 2 packets, got {length}")));
    }
    Ok(ProbeSpec {
        length,
        rate_pps,
        kind: PacketKind::Udp,
        size_bytes: DEFAULT_PROBE_SIZE,
        flow_policy,
        ttl_plan: None,
        default_ttl: DEFAULT_TTL,
    })
}

/// Train whose packets `0, g, 2g, ...` expire at `expire_hop`, behind the NF.
pub fn build_one_sided_probe(
    link: &LinkModel,
    length: usize,
    gttl: usize,
    expire_hop: usize,
    rate_pps: f64,
) -> Result<ProbeSpec> {
    if length < 2 {
        return Err(Error::Probe(format!("train needs at least 2 packets, got {length}")));
    }
    if gttl == 0 {
        return Err(Error::Probe("g_TTL must be at least 1".into()));
    }
    check_expire_hop(link, expire_hop)?;
    Ok(ProbeSpec {
        length,
        rate_pps,
        kind: PacketKind::Udp,
        size_bytes: DEFAULT_PROBE_SIZE,
        flow_policy: FlowPolicy::SingleFlow,
        ttl_plan: Some(TtlPlan { gap: gttl, expire_ttl: expire_hop as u8 }),
        default_ttl: DEFAULT_TTL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GttlRounding {
    /// Smallest integer strictly above the bound.
    Exact,
    /// That integer rounded up to a multiple of 10.
    #[default]
    UpToTen,
}

/// TTL spacing such that consecutive marked packets reach the router more
/// than `router_ns` apart even at `c_max_pps`.
pub fn choose_gttl(router_ns: u64, c_max_pps: u64, rounding: GttlRounding) -> usize {
    // packets arriving during one reply generation: router_ns * c_max / 1e9
    let strict = (u128::from(router_ns) * u128::from(c_max_pps) / 1_000_000_000) as usize + 1;
    match rounding {
        GttlRounding::Exact => strict,
        GttlRounding::UpToTen => strict.div_ceil(10) * 10,
    }
}
