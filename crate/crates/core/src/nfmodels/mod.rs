//! Behavioral models of the path endpoints: the network function, the
//! on-path router, the receiver, the sender, and the countermeasure stages
//! an operator can bolt onto the NF egress.

mod countermeasures;
mod governor;
mod nf;
pub mod presets;
mod rate;
mod router;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::SimTime;

pub use countermeasures::{apply_countermeasures, CountermeasureConfig, EgressEvent, DEFAULT_UNDERCLOCK_NS};
pub use governor::{Governor, GovernorConfig, DEFAULT_TICK_NS};
pub use nf::{assign_thread, nf_service_time, LevelChange, NfState, ThreadAssign};
pub(crate) use nf::{run_nf, NfInput};
pub use rate::Gcra;
pub use router::RouterConfig;
pub(crate) use router::IcmpGenerator;

/// Default NF ingress buffer, in packets. Droptail.
pub const DEFAULT_QUEUE_CAPACITY: usize = 16_384;

/// Relative speed factors of the default three-level DVFS ladder.
pub const DEFAULT_FREQ_LEVELS: [f64; 3] = [0.46, 0.77, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NfConfig {
    /// Per-packet processing time at the top frequency level.
    pub base_service_ns: u64,
    /// Strictly increasing speed factors in (0, 1]; the last one is 1.0.
    /// A single level disables DVFS.
    #[serde(default = "default_levels")]
    pub freq_levels: Vec<f64>,
    #[serde(default)]
    pub governor: GovernorConfig,
    #[serde(default = "one")]
    pub threads_k: usize,
    #[serde(default)]
    pub thread_assign: ThreadAssign,
    #[serde(default)]
    pub countermeasures: Vec<CountermeasureConfig>,
    #[serde(default = "default_queue")]
    pub queue_capacity: usize,
}

fn default_levels() -> Vec<f64> {
    DEFAULT_FREQ_LEVELS.to_vec()
}

fn one() -> usize {
    1
}

fn default_queue() -> usize {
    DEFAULT_QUEUE_CAPACITY
}

impl NfConfig {
    /// Fixed-frequency single-thread NF.
    pub fn fixed(base_service_ns: u64) -> Self {
        NfConfig {
            base_service_ns,
            freq_levels: vec![1.0],
            governor: GovernorConfig::default(),
            threads_k: 1,
            thread_assign: ThreadAssign::PerFlowHash,
            countermeasures: Vec::new(),
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }

    pub fn dvfs_enabled(&self) -> bool {
        self.freq_levels.len() > 1
    }

    /// Same NF with the governor pinned at the top frequency.
    pub fn pinned(&self) -> Self {
        NfConfig {
            freq_levels: vec![1.0],
            ..self.clone()
        }
    }

    /// Packets per second the NF sustains at top frequency with all threads busy.
    pub fn analytic_capacity_pps(&self) -> f64 {
        if self.base_service_ns == 0 {
            return f64::INFINITY;
        }
        self.threads_k as f64 * 1e9 / self.base_service_ns as f64
    }

    /// Governor settings after countermeasures that rewrite them.
    pub fn effective_governor(&self) -> GovernorConfig {
        let mut g = self.governor.clone();
        for cm in &self.countermeasures {
            if let CountermeasureConfig::Underclock { sustain_ticks } = cm {
                g.sustain_ticks_up = g.sustain_ticks_up.max(*sustain_ticks);
            }
        }
        g
    }

    pub fn validate(&self) -> Result<()> {
        if self.freq_levels.is_empty() {
            return Err(Error::config("nf.freq_levels", "must not be empty"));
        }
        if self.freq_levels.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return Err(Error::config("nf.freq_levels", "factors must lie in (0, 1]"));
        }
        if self.freq_levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("nf.freq_levels", "must be strictly increasing"));
        }
        if *self.freq_levels.last().unwrap() != 1.0 {
            return Err(Error::config("nf.freq_levels", "last level must be 1.0"));
        }
        if self.threads_k == 0 {
            return Err(Error::config("nf.threads_k", "must be positive"));
        }
        if self.queue_capacity == 0 {
            return Err(Error::config("nf.queue_capacity", "must be positive"));
        }
        self.governor.validate()?;
        for (i, cm) in self.countermeasures.iter().enumerate() {
            cm.validate(&format!("nf.countermeasures[{i}]"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverConfig {
    /// Timestamp batching interval B. Zero records exact arrival times.
    #[serde(default)]
    pub batch_interval_ns: u64,
}

impl ReceiverConfig {
    /// Recorded timestamp of a packet that physically arrives at `t`.
    pub fn timestamp(&self, t: SimTime) -> SimTime {
        t.ceil_to(self.batch_interval_ns)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SenderConfig {
    pub nominal_rate_pps: f64,
    #[serde(default)]
    pub sender_dvfs: bool,
    #[serde(default = "default_slow_factor")]
    pub slow_factor: f64,
    #[serde(default = "default_slow_window")]
    pub slow_window_packets: usize,
}

fn default_slow_factor() -> f64 {
    2.0
}

fn default_slow_window() -> usize {
    500
}

impl Default for SenderConfig {
    fn default() -> Self {
        SenderConfig {
            nominal_rate_pps: 1_000_000.0,
            sender_dvfs: false,
            slow_factor: default_slow_factor(),
            slow_window_packets: default_slow_window(),
        }
    }
}

impl SenderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nominal_rate_pps > 0.0) {
            return Err(Error::config("sender.nominal_rate_pps", "must be positive"));
        }
        if self.sender_dvfs && !(self.slow_factor > 1.0) {
            return Err(Error::config(
                "sender.slow_factor",
                "must exceed 1 when sender_dvfs is on",
            ));
        }
        Ok(())
    }

    /// Scheduled send instants for `n` packets at `rate_pps`. With sender
    /// DVFS on, the first `slow_window_packets` go out `slow_factor` times slower.
    pub fn send_times(&self, n: usize, rate_pps: f64) -> Vec<SimTime> {
        let fast = crate::time::interval_ns(rate_pps);
        let (slow, window) = if self.sender_dvfs {
            (fast * self.slow_factor, self.slow_window_packets.min(n))
        } else {
            (fast, 0)
        };
        (0..n)
            .map(|i| {
                let t = if i < window {
                    i as f64 * slow
                } else {
                    window as f64 * slow + (i - window) as f64 * fast
                };
                SimTime(t.round() as u64)
            })
            .collect()
    }
}
