use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// Simulated instant or duration in integer nanoseconds.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_ns(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_us(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_ms(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub const fn as_ns(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    /// Smallest multiple of `interval` that is `>= self`. Zero interval is identity.
    pub fn ceil_to(self, interval: u64) -> SimTime {
        if interval == 0 {
            return self;
        }
        SimTime(self.0.div_ceil(interval) * interval)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: u64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl AddAssign<u64> for SimTime {
    fn add_assign(&mut self, rhs: u64) {
        self.0 += rhs;
    }
}

impl Sub for SimTime {
    type Output = u64;
    fn sub(self, rhs: SimTime) -> u64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

/// Nanosecond interval between packets at `rate_pps`.
pub(crate) fn interval_ns(rate_pps: f64) -> f64 {
    1e9 / rate_pps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_to_multiples() {
        assert_eq!(SimTime(0).ceil_to(300), SimTime(0));
        assert_eq!(SimTime(1).ceil_to(300), SimTime(300));
        assert_eq!(SimTime(300).ceil_to(300), SimTime(300));
        assert_eq!(SimTime(301).ceil_to(300), SimTime(600));
        assert_eq!(SimTime(17).ceil_to(0), SimTime(17));
    }
}
