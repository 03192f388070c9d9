use serde::{Deserialize, Serialize};

use crate::dispersion::{Estimator, StepDetectParams};
use crate::error::{Error, Result};
use crate::nfmodels::{presets, CountermeasureConfig};
use crate::planner::PlanContext;
use crate::probegen::{ProbeSpec, SlopsParams};
use crate::simcore::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSource {
    Preset(String),
    Inline(Box<ScenarioConfig>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbePlan {
    /// Length from the planner. A one-sided context without `g_ttl` gets
    /// one from a router-time measurement.
    Plan(PlanContext),
    Explicit(ProbeSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSource {
    #[default]
    Analytic,
    Flood,
}

fn default_runs() -> usize {
    100
}

fn default_cm_runs() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSource,
    /// Pin the governor at top frequency.
    #[serde(default)]
    pub pinned: bool,
    /// Override the scenario's noise switch.
    #[serde(default)]
    pub noise: Option<bool>,
    /// Override the receiver batch interval.
    #[serde(default)]
    pub batch_interval_ns: Option<u64>,
    pub methods: Vec<Estimator>,
    pub probe: ProbePlan,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub truth: TruthSource,
    #[serde(default)]
    pub step: StepDetectParams,
    #[serde(default)]
    pub slops: SlopsParams,
    /// Countermeasures evaluated one at a time.
    #[serde(default)]
    pub countermeasure_grid: Vec<CountermeasureConfig>,
    #[serde(default = "default_cm_runs")]
    pub countermeasure_runs: usize,
}

impl ExperimentConfig {
    pub fn new(scenario: ScenarioSource, methods: Vec<Estimator>, probe: ProbePlan) -> Self {
        ExperimentConfig {
            scenario,
            pinned: false,
            noise: None,
            batch_interval_ns: None,
            methods,
            probe,
            runs: default_runs(),
            base_seed: 0,
            truth: TruthSource::Analytic,
            step: StepDetectParams::default(),
            slops: SlopsParams::default(),
            countermeasure_grid: Vec::new(),
            countermeasure_runs: default_cm_runs(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment serializes to toml")
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::config("runs", "must be at least 1"));
        }
        if self.countermeasure_runs == 0 {
            return Err(Error::config("countermeasure_runs", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "must name at least one method"));
        }
        self.step.validate()?;
        if self.methods.contains(&Estimator::Slops) {
            self.slops.validate()?;
        }
        for (i, cm) in self.countermeasure_grid.iter().enumerate() {
            cm.validate(&format!("countermeasure_grid[{i}]"))?;
        }
        self.resolve_scenario().map(|_| ())
    }

    /// The scenario with all modifiers applied.
    pub fn resolve_scenario(&self) -> Result<ScenarioConfig> {
        let mut s = match &self.scenario {
            ScenarioSource::Preset(name) => presets::preset(name)?,
            ScenarioSource::Inline(s) => (**s).clone(),
        };
        if self.pinned {
            s.nf = s.nf.pinned();
        }
        if let Some(on) = self.noise {
            s.noise.enabled = on;
        }
        if let Some(b) = self.batch_interval_ns {
            s.receiver.batch_interval_ns = b;
        }
        s.validate()?;
        Ok(s)
    }

    /// Label used in the results' scenario column.
    pub fn scenario_label(&self) -> String {
        let mut label = match &self.scenario {
            ScenarioSource::Preset(name) => name.clone(),
            ScenarioSource::Inline(s) if !s.name.is_empty() => s.name.clone(),
            ScenarioSource::Inline(_) => "inline".to_string(),
        };
        if self.pinned {
            label.push_str("+pinned");
        }
        if self.noise == Some(true) {
            label.push_str("+noise");
        }
        if let Some(b) = self.batch_interval_ns.filter(|b| *b > 0) {
            label.push_str(&format!("+batch{b}ns"));
        }
        label
    }
}
