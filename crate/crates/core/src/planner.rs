//! Probe-length decision tree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest two-sided train the planner recommends.
pub const MIN_TWO_SIDED_LENGTH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ThreatModel {
    OneSided,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DvfsKnowledge {
    Yes,
    No,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanContext {
    pub threat_model: ThreatModel,
    #[serde(default)]
    pub dvfs_expected: DvfsKnowledge,
    #[serde(default)]
    pub threads_k_est: Option<usize>,
    #[serde(default)]
    pub batch_interval_est_ns: Option<u64>,
    #[serde(default)]
    pub g_ttl: Option<usize>,
    /// Marked packets wanted in a one-sided train.
    #[serde(default = "default_c1")]
    pub c1: usize,
    /// Packets per thread in a two-sided train.
    #[serde(default = "default_c")]
    pub c: usize,
    #[serde(default = "default_dvfs_length")]
    pub dvfs_default_length: usize,
    #[serde(default)]
    pub send_rate_est_pps: Option<f64>,
}

fn default_c1() -> usize {
    30
}

fn default_c() -> usize {
    50
}

fn default_dvfs_length() -> usize {
    5_000
}

impl PlanContext {
    pub fn new(threat_model: ThreatModel) -> Self {
        PlanContext {
            threat_model,
            dvfs_expected: DvfsKnowledge::Unknown,
            threads_k_est: None,
            batch_interval_est_ns: None,
            g_ttl: None,
            c1: default_c1(),
            c: default_c(),
            dvfs_default_length: default_dvfs_length(),
            send_rate_est_pps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanBranch {
    OneSidedTtlSpacing,
    TwoSidedDvfs,
    TwoSidedFixedFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanResult {
    pub length: usize,
    pub probe_kind: ThreatModel,
    pub rationale: PlanBranch,
}

impl PlanResult {
    pub fn rationale_text(&self) -> &'static str {
        match self.rationale {
            PlanBranch::OneSidedTtlSpacing => "one-sided: c1 x g_TTL",
            PlanBranch::TwoSidedDvfs => "two-sided, DVFS yes/unknown: long train to reach top frequency",
            PlanBranch::TwoSidedFixedFrequency => "two-sided, no DVFS: max(floor, c x k, B x rate)",
        }
    }
}

/// Recommends a probe length. Unknown DVFS is planned as if present.
pub fn plan_probe_length(ctx: &PlanContext) -> Result<PlanResult> {
    let mut missing = Vec::new();
    if ctx.c1 == 0 {
        missing.push("c1 > 0".to_string());
    }
    if ctx.c == 0 {
        missing.push("c > 0".to_string());
    }
    if ctx.dvfs_default_length < 2 {
        missing.push("dvfs_default_length >= 2".to_string());
    }
    match ctx.threat_model {
        ThreatModel::OneSided => {
            let g = match ctx.g_ttl {
                Some(g) if g >= 1 => Some(g),
                Some(_) => {
                    missing.push("g_ttl >= 1".to_string());
                    None
                }
                None => {
                    missing.push("g_ttl".to_string());
                    None
                }
            };
            if !missing.is_empty() {
                return Err(Error::Planning(missing));
            }
            let g = g.expect("checked above");
            Ok(PlanResult {
                length: (ctx.c1 * g).max(2),
                probe_kind: ThreatModel::OneSided,
                rationale: PlanBranch::OneSidedTtlSpacing,
            })
        }
        ThreatModel::TwoSided => {
            if !missing.is_empty() {
                return Err(Error::Planning(missing));
            }
            if ctx.dvfs_expected != DvfsKnowledge::No {
                return Ok(PlanResult {
                    length: ctx.dvfs_default_length,
                    probe_kind: ThreatModel::TwoSided,
                    rationale: PlanBranch::TwoSidedDvfs,
                });
            }
            let mut length = MIN_TWO_SIDED_LENGTH;
            if let Some(k) = ctx.threads_k_est {
                length = length.max(ctx.c * k);
            }
            if let (Some(b), Some(rate)) = (ctx.batch_interval_est_ns, ctx.send_rate_est_pps) {
                length = length.max((b as f64 * rate / 1e9).ceil() as usize);
            }
            Ok(PlanResult {
                length,
                probe_kind: ThreatModel::TwoSided,
                rationale: PlanBranch::TwoSidedFixedFrequency,
            })
        }
    }
}
