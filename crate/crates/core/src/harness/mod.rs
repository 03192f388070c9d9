//! Experiment orchestration: ground truth, error statistics, seeded
//! multi-run experiments and countermeasure sweeps.

mod config;
mod experiment;
mod results;
mod stats;
mod truth;

pub use config::{ExperimentConfig, ProbePlan, ScenarioSource, TruthSource};
pub use experiment::{
    background_latency_ns, eval_countermeasures, resolve_probe, run_experiment, run_trials, Trial,
    TrialEstimate, BACKGROUND_LOAD, BACKGROUND_PACKETS,
};
pub use results::{ResultsRow, ResultsTable, RESULTS_HEADER};
pub use stats::{ape, mdape, quantile};
pub use truth::{analytic_capacity, ground_truth_flood, ground_truth_flood_with, FloodSearch, GroundTruth};
