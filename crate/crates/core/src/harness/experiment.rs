use rayon::prelude::*;

use crate::dispersion::{
    baseline_estimate, dispersion_from_trace, nfty_estimate, onesided_dispersion, DispersionSeries, Estimator,
};
use crate::error::{Error, Result};
use crate::planner::{plan_probe_length, ThreatModel};
use crate::probegen::{
    build_one_sided_probe, build_two_sided_probe, choose_gttl, default_expire_hop, estimate_router_time,
    slops_search, FlowPolicy, GttlRounding, ProbeSpec,
};
use crate::simcore::{run_simulation, ScenarioConfig, Trace};

use super::config::{ExperimentConfig, ProbePlan, TruthSource};
use super::results::{ResultsRow, ResultsTable};
use super::stats::{ape, quantile};
use super::truth::{analytic_capacity, ground_truth_flood};

/// Background flow used for the overhead proxy.
pub const BACKGROUND_PACKETS: usize = 1_000;
/// Its rate as a fraction of the NF's capacity.
pub const BACKGROUND_LOAD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialEstimate {
    pub method: Estimator,
    pub capacity_pps: Option<f64>,
    pub packets_sent: usize,
    pub error: Option<String>,
}

/// One seeded run: every configured method applied to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub run: usize,
    pub seed: u64,
    /// Whether the NF reached its top frequency during the probe.
    pub reached_top: bool,
    pub estimates: Vec<TrialEstimate>,
}

impl Trial {
    pub fn estimate(&self, method: Estimator) -> Option<&TrialEstimate> {
        self.estimates.iter().find(|e| e.method == method)
    }
}

/// Turns the configured plan into a concrete probe, plus the expiry hop for
/// one-sided probes.
pub fn resolve_probe(cfg: &ExperimentConfig, scenario: &ScenarioConfig) -> Result<(ProbeSpec, Option<usize>)> {
    let rate = scenario.sender.nominal_rate_pps;
    let spec = match &cfg.probe {
        ProbePlan::Explicit(p) => p.clone(),
        ProbePlan::Plan(ctx) => {
            let mut ctx = *ctx;
            let hop = default_expire_hop(&scenario.link);
            if ctx.threat_model == ThreatModel::OneSided && ctx.g_ttl.is_none() {
                let t_r = estimate_router_time(scenario, hop, cfg.base_seed)?;
                ctx.g_ttl = Some(choose_gttl(t_r, rate.ceil() as u64, GttlRounding::UpToTen));
            }
            let plan = plan_probe_length(&ctx)?;
            match plan.probe_kind {
                ThreatModel::TwoSided => {
                    build_two_sided_probe(plan.length, rate, FlowPolicy::SingleFlow)?.with_kind(scenario.packet_kind)
                }
                ThreatModel::OneSided => {
                    let g = ctx.g_ttl.expect("planner checked g_ttl");
                    build_one_sided_probe(&scenario.link, plan.length, g, hop, rate)?
                        .with_kind(scenario.packet_kind)
                }
            }
        }
    };
    spec.validate(&scenario.link)?;
    let hop = spec.ttl_plan.map(|p| p.expire_ttl as usize);
    Ok((spec, hop))
}

fn series_of(trace: &Trace, expire_hop: Option<usize>) -> Result<DispersionSeries<f64>> {
    match expire_hop {
        None => dispersion_from_trace(trace, None),
        Some(hop) => {
            let replies: Vec<_> = trace.icmp_replies.iter().filter(|r| r.router_hop == hop).cloned().collect();
            onesided_dispersion(&replies)
        }
    }
}

fn failed(method: Estimator, packets_sent: usize, e: &Error) -> TrialEstimate {
    TrialEstimate { method, capacity_pps: None, packets_sent, error: Some(e.to_string()) }
}

fn run_one(
    cfg: &ExperimentConfig,
    scenario: &ScenarioConfig,
    probe: &ProbeSpec,
    expire_hop: Option<usize>,
    run: usize,
) -> Trial {
    let seed = cfg.base_seed.wrapping_add(run as u64);
    let mut estimates = Vec::with_capacity(cfg.methods.len());
    let mut reached_top = false;
    let dispersion_methods: Vec<Estimator> = cfg.methods.iter().copied().filter(|m| m.is_dispersion()).collect();
    if !dispersion_methods.is_empty() {
        let series = run_simulation(scenario, probe, seed).and_then(|trace| {
            reached_top = trace.reached_top_frequency();
            series_of(&trace, expire_hop)
        });
        for m in dispersion_methods {
            let est = series.as_ref().map_err(Clone::clone).and_then(|s| match m {
                Estimator::Nfty => nfty_estimate(s, &cfg.step),
                other => baseline_estimate(s, other),
            });
            estimates.push(match est {
                Ok(r) => TrialEstimate {
                    method: m,
                    capacity_pps: Some(r.capacity_pps),
                    packets_sent: probe.length,
                    error: None,
                },
                Err(e) => failed(m, probe.length, &e),
            });
        }
    }
    if cfg.methods.contains(&Estimator::Slops) {
        estimates.push(match slops_search(scenario, &cfg.slops, seed) {
            Ok(r) => TrialEstimate {
                method: Estimator::Slops,
                capacity_pps: Some(r.capacity_pps),
                packets_sent: r.packets_sent,
                error: None,
            },
            Err(e) => failed(Estimator::Slops, 0, &e),
        });
    }
    Trial { run, seed, reached_top, estimates }
}

fn trials_on(cfg: &ExperimentConfig, scenario: &ScenarioConfig, runs: usize) -> Result<Vec<Trial>> {
    let (probe, hop) = resolve_probe(cfg, scenario)?;
    Ok((0..runs).into_par_iter().map(|run| run_one(cfg, scenario, &probe, hop, run)).collect())
}

/// All seeded runs of an experiment, in run order.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<Trial>> {
    cfg.validate()?;
    trials_on(cfg, &cfg.resolve_scenario()?, cfg.runs)
}

fn truth_of(cfg: &ExperimentConfig, scenario: &ScenarioConfig) -> Result<f64> {
    match cfg.truth {
        TruthSource::Analytic => Ok(analytic_capacity(&scenario.nf)),
        TruthSource::Flood => ground_truth_flood(scenario, cfg.base_seed).map(|g| g.capacity_pps),
    }
}

fn aggregate(label: &str, method: Estimator, truth: f64, trials: &[Trial]) -> ResultsRow {
    let mut errs = Vec::new();
    let mut packets = Vec::new();
    let mut failures = 0;
    for t in trials {
        let Some(e) = t.estimate(method) else { continue };
        packets.push(e.packets_sent as f64);
        match e.capacity_pps {
            Some(c) => errs.push(ape(c, truth)),
            None => failures += 1,
        }
    }
    errs.sort_by(f64::total_cmp);
    packets.sort_by(f64::total_cmp);
    let q = |p: f64| if errs.is_empty() { f64::INFINITY } else { quantile(&errs, p) };
    ResultsRow {
        scenario: label.to_string(),
        method,
        mdape_pct: q(0.5),
        err_p25: q(0.25),
        err_p75: q(0.75),
        packets_sent_median: quantile(&packets, 0.5),
        runs: packets.len(),
        failures,
        overhead_pct: None,
    }
}

/// Runs every method `cfg.runs` times (seed = base_seed + run) and reports
/// one row per method. Failed runs are counted, not scored.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    cfg.validate()?;
    let scenario = cfg.resolve_scenario()?;
    let truth = truth_of(cfg, &scenario)?;
    let trials = trials_on(cfg, &scenario, cfg.runs)?;
    let label = cfg.scenario_label();
    Ok(ResultsTable { rows: cfg.methods.iter().map(|&m| aggregate(&label, m, truth, &trials)).collect() })
}

/// Mean sender-to-receiver latency of a light single-flow background stream.
pub fn background_latency_ns(scenario: &ScenarioConfig, seed: u64) -> Result<f64> {
    let rate = BACKGROUND_LOAD * analytic_capacity(&scenario.nf);
    let probe = build_two_sided_probe(BACKGROUND_PACKETS, rate, FlowPolicy::SingleFlow)?;
    let trace = run_simulation(scenario, &probe, seed)?;
    let lat: Vec<f64> = trace
        .received()
        .filter_map(|p| p.t_recv.map(|t| (t - p.t_sent) as f64))
        .collect();
    if lat.is_empty() {
        return Err(Error::Estimation("background flow delivered nothing".into()));
    }
    Ok(lat.iter().sum::<f64>() / lat.len() as f64)
}

/// Scores the attack against each countermeasure of the grid, one at a
/// time, next to a no-countermeasure baseline. `overhead_pct` is the added
/// mean latency of a background flow relative to the baseline.
pub fn eval_countermeasures(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    cfg.validate()?;
    if cfg.countermeasure_grid.is_empty() {
        return Err(Error::config("countermeasure_grid", "must list at least one countermeasure"));
    }
    let base = cfg.resolve_scenario()?;
    let truth = truth_of(cfg, &base)?;
    let label = cfg.scenario_label();
    let base_latency = background_latency_ns(&base, cfg.base_seed)?;

    let mut variants = vec![(format!("{label}+none"), base.clone())];
    for cm in &cfg.countermeasure_grid {
        let mut s = base.clone();
        s.nf.countermeasures.push(cm.clone());
        variants.push((format!("{label}+{}", cm.label()), s));
    }
    let mut rows = Vec::new();
    for (name, scenario) in variants {
        let overhead = (background_latency_ns(&scenario, cfg.base_seed)? - base_latency) / base_latency * 100.0;
        let trials = trials_on(cfg, &scenario, cfg.countermeasure_runs)?;
        for &m in &cfg.methods {
            let mut row = aggregate(&name, m, truth, &trials);
            row.overhead_pct = Some(overhead);
            rows.push(row);
        }
    }
    Ok(ResultsTable { rows })
}
