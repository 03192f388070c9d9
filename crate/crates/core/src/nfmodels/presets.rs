//! Shipped scenarios, named after the NF and rule set they stand for.
//! RL presets are capacities for TCP SYN packets, BL presets for UDP.

use crate::error::{Error, Result};
use crate::simcore::ScenarioConfig;

use super::CountermeasureConfig;

const FILES: [(&str, &str); 5] = [
    ("SNORT-RL", include_str!("../../presets/SNORT-RL.toml")),
    ("SUR-BL", include_str!("../../presets/SUR-BL.toml")),
    ("SUR-RL", include_str!("../../presets/SUR-RL.toml")),
    ("SUR-BL-mt", include_str!("../../presets/SUR-BL-mt.toml")),
    ("SUR-RL-mt", include_str!("../../presets/SUR-RL-mt.toml")),
];

/// Measured capacities the presets reproduce, packets per second.
pub const NOMINAL_CAPACITY: [(&str, f64); 5] = [
    ("SNORT-RL", 67_500.0),
    ("SUR-BL", 142_600.0),
    ("SUR-RL", 200_880.0),
    ("SUR-BL-mt", 227_720.0),
    ("SUR-RL-mt", 336_060.0),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    FILES.iter().map(|(n, _)| *n)
}

/// Case-insensitive lookup.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let (_, text) = FILES
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .ok_or_else(|| {
            Error::config(
                "scenario_preset",
                format!("unknown preset `{name}`, expected one of {}", names().collect::<Vec<_>>().join(", ")),
            )
        })?;
    ScenarioConfig::from_toml(text)
}

pub fn all() -> Vec<ScenarioConfig> {
    names().map(|n| preset(n).expect("shipped presets parse")).collect()
}

pub fn nominal_capacity(name: &str) -> Option<f64> {
    NOMINAL_CAPACITY
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, c)| *c)
}

/// Extra batching at 300 µs.
pub fn extra_batch_300us() -> CountermeasureConfig {
    CountermeasureConfig::ExtraBatch { interval_ns: 300_000 }
}

/// Extra batching at 500 µs.
pub fn extra_batch_500us() -> CountermeasureConfig {
    CountermeasureConfig::ExtraBatch { interval_ns: 500_000 }
}
