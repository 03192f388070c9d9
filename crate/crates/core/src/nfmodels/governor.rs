use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold DVFS governor.
///
/// Every `tick_ns` the governor looks at the busy fraction of the last
/// window. It steps one level up after `sustain_ticks_up` consecutive ticks at
/// or above `up_threshold`, and one level down on any tick at or below
/// `down_threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovernorConfig {
    #[serde(default = "default_tick")]
    pub tick_ns: u64,
    #[serde(default = "default_up")]
    pub up_threshold: f64,
    #[serde(default = "default_down")]
    pub down_threshold: f64,
    #[serde(default = "yes")]
    pub phase_random: bool,
    #[serde(default = "one")]
    pub sustain_ticks_up: u32,
}

/// 10 ms, the sampling period of a stock ondemand governor.
pub const DEFAULT_TICK_NS: u64 = 10_000_000;

fn default_tick() -> u64 {
    DEFAULT_TICK_NS
}
fn default_up() -> f64 {
    0.9
}
fn default_down() -> f64 {
    0.2
}
fn yes() -> bool {
    true
}
fn one() -> u32 {
    1
}

impl Default for GovernorConfig {
    fn default() -> Self {
        GovernorConfig {
            tick_ns: DEFAULT_TICK_NS,
            up_threshold: default_up(),
            down_threshold: default_down(),
            phase_random: true,
            sustain_ticks_up: 1,
        }
    }
}

impl GovernorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tick_ns == 0 {
            return Err(Error::config("nf.governor.tick_ns", "must be positive"));
        }
        if !(self.up_threshold > 0.0 && self.up_threshold <= 1.0) {
            return Err(Error::config("nf.governor.up_threshold", "must lie in (0, 1]"));
        }
        if !(self.down_threshold >= 0.0 && self.down_threshold < 1.0) {
            return Err(Error::config("nf.governor.down_threshold", "must lie in [0, 1)"));
        }
        if self.down_threshold >= self.up_threshold {
            return Err(Error::config(
                "nf.governor.down_threshold",
                "must be below up_threshold",
            ));
        }
        if self.sustain_ticks_up == 0 {
            return Err(Error::config("nf.governor.sustain_ticks_up", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Governor {
    cfg: GovernorConfig,
    levels: usize,
    level: usize,
    up_streak: u32,
}

impl Governor {
    /// Starts at the lowest level, as an idle CPU would.
    pub fn new(cfg: GovernorConfig, levels: usize) -> Self {
        Governor {
            cfg,
            levels: levels.max(1),
            level: 0,
            up_streak: 0,
        }
    }

    pub fn at_level(mut self, level: usize) -> Self {
        self.level = level.min(self.levels - 1);
        self
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn top(&self) -> usize {
        self.levels - 1
    }

    /// Feeds the busy fraction of the window that just closed and returns
    /// the level for the next window.
    pub fn tick(&mut self, busy_fraction: f64) -> usize {
        if busy_fraction >= self.cfg.up_threshold {
            self.up_streak += 1;
            if self.up_streak >= self.cfg.sustain_ticks_up {
                self.level = (self.level + 1).min(self.top());
                self.up_streak = 0;
            }
        } else {
            self.up_streak = 0;
            if busy_fraction <= self.cfg.down_threshold {
                self.level = self.level.saturating_sub(1);
            }
        }
        self.level
    }
}
