use serde::{Deserialize, Serialize};

use super::Gcra;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouterConfig {
    /// Control-plane time to build one TTL-exceeded reply.
    pub icmp_processing_ns: u64,
    /// Token-bucket rate for TTL-exceeded replies; 0 disables limiting.
    pub icmp_rate_limit_pps: f64,
    pub icmp_bucket_burst: u32,
    /// Data-plane forwarding latency per router.
    pub forward_ns: u64,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig {
            icmp_processing_ns: 55_000,
            icmp_rate_limit_pps: 0.0,
            icmp_bucket_burst: 1,
            forward_ns: 500,
        }
    }
}

impl RouterConfig {
    /// Five replies per second, as seen on rate-limited campus routers.
    pub fn rate_limited(self) -> Self {
        RouterConfig {
            icmp_rate_limit_pps: 5.0,
            icmp_bucket_burst: 1,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.icmp_processing_ns <= self.forward_ns {
            return Err(Error::config(
                "router.icmp_processing_ns",
                "must exceed forward_ns",
            ));
        }
        if !(self.icmp_rate_limit_pps >= 0.0) {
            return Err(Error::config("router.icmp_rate_limit_pps", "must be non-negative"));
        }
        if self.icmp_bucket_burst == 0 {
            return Err(Error::config("router.icmp_bucket_burst", "must be at least 1"));
        }
        Ok(())
    }
}

/// TTL-exceeded reply generation at one router: a token-bucket policer in
/// front of a single FIFO control-plane server.
#[derive(Debug, Clone)]
pub(crate) struct IcmpGenerator {
    policer: Option<Gcra>,
    processing_ns: u64,
    free_at: u64,
}

impl IcmpGenerator {
    pub fn new(cfg: &RouterConfig) -> Self {
        IcmpGenerator {
            policer: (cfg.icmp_rate_limit_pps > 0.0)
                .then(|| Gcra::new(cfg.icmp_rate_limit_pps, cfg.icmp_bucket_burst)),
            processing_ns: cfg.icmp_processing_ns,
            free_at: 0,
        }
    }

    /// Handles an expired packet arriving at `t`; returns the time its reply
    /// leaves the router, or `None` when rate limiting suppressed it.
    /// Calls must come in non-decreasing `t`.
    pub fn expire(&mut self, t: u64) -> Option<u64> {
        if let Some(p) = self.policer.as_mut() {
            if !p.conform(t) {
                return None;
            }
        }
        let done = t.max(self.free_at) + self.processing_ns;
        self.free_at = done;
        Some(done)
    }
}
