//! Network-function capacity reconnaissance, simulated end to end.
//!
//! The crate models a sender, a stateful network function (NF) with DVFS and
//! worker threads, on-path routers and a batching receiver as a deterministic
//! discrete-event pipeline. On top of it sit the attacker's probe builders,
//! the dispersion estimators (kernel binary segmentation with minimum
//! segment mean selection, plus the classic baselines), a probe-length
//! planner, countermeasures, and an experiment harness that scores every
//! method against simulated ground truth.
//!
//! The estimation math in [`dispersion`] is generic over the floating-point
//! scalar (see [`Scalar`]); the aliases below pin the common instantiations.

// `!(x > 0.0)` rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dispersion;
pub mod error;
pub mod harness;
pub mod nfmodels;
pub mod planner;
pub mod probegen;
mod rng;
pub mod scalar;
pub mod simcore;
pub mod time;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use time::SimTime;

pub use dispersion::{
    Estimator, SeriesKind, StepDetectParams,
};
pub use harness::{ExperimentConfig, ResultsRow, ResultsTable};
pub use nfmodels::{
    CountermeasureConfig, GovernorConfig, NfConfig, ReceiverConfig, RouterConfig, SenderConfig,
    ThreadAssign,
};
pub use planner::{plan_probe_length, DvfsKnowledge, PlanContext, PlanResult, ThreatModel};
pub use probegen::{FlowPolicy, PacketKind, ProbeSpec, SlopsParams};
pub use simcore::{
    run_flood, run_simulation, FloodSpec, FloodStats, IcmpReplyRecord, LinkModel, NoiseModel,
    PacketRecord, ScenarioConfig, Trace,
};

/// Dispersion series in double precision.
pub type DispersionSeries = dispersion::DispersionSeries<f64>;
/// Dispersion series in single precision.
pub type DispersionSeries32 = dispersion::DispersionSeries<f32>;
/// Segmentation in double precision.
pub type Segmentation = dispersion::Segmentation<f64>;
/// Segmentation in single precision.
pub type Segmentation32 = dispersion::Segmentation<f32>;
/// Estimate report in double precision, the harness default.
pub type EstimateReport = dispersion::EstimateReport<f64>;
/// Estimate report in single precision.
pub type EstimateReport32 = dispersion::EstimateReport<f32>;
