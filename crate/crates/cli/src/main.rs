use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nfcr::dispersion::{self, io as dio, Estimator, StepDetectParams};
use nfcr::harness::{self, ExperimentConfig, FloodSearch, ResultsTable};
use nfcr::nfmodels::presets;
use nfcr::planner::{plan_probe_length, DvfsKnowledge, PlanContext, ThreatModel};
use nfcr::probegen::{self, FlowPolicy, ProbeSpec};
use nfcr::simcore::{self, ScenarioConfig};

#[derive(Parser)]
#[command(name = "nfcr", version, about = "Network-function capacity reconnaissance lab")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Recommend a probe length.
    Plan(PlanArgs),
    /// Run one probe through a scenario and write the trace.
    Simulate(SimulateArgs),
    /// Estimate capacity from a trace.
    Estimate(EstimateArgs),
    /// Flood a scenario to find its capacity.
    GroundTruth(GroundTruthArgs),
    /// Run an experiment file.
    Experiment(ExperimentArgs),
    /// Run an experiment file's countermeasure grid.
    Countermeasures(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Threat {
    OneSided,
    TwoSided,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dvfs {
    Yes,
    No,
    Unknown,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Csv,
    Table,
}

#[derive(Args)]
struct OutArgs {
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    /// TOML plan context; flags below are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "two-sided")]
    threat: Threat,
    #[arg(long, value_enum, default_value = "unknown")]
    dvfs: Dvfs,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    batch_ns: Option<u64>,
    #[arg(long)]
    gttl: Option<usize>,
    #[arg(long)]
    send_rate: Option<f64>,
    #[arg(long, default_value_t = 30)]
    c1: usize,
    #[arg(long, default_value_t = 50)]
    c: usize,
    #[arg(long, default_value_t = 5_000)]
    dvfs_length: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Preset name or path to a scenario TOML file.
    #[arg(long, default_value = "SUR-RL")]
    scenario: String,
    /// Pin the governor at top frequency.
    #[arg(long)]
    pinned: bool,
    /// Turn path noise on.
    #[arg(long)]
    noise: bool,
    /// Receiver batch interval.
    #[arg(long)]
    batch_ns: Option<u64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut s = if Path::new(&self.scenario).is_file() {
            let text = fs::read_to_string(&self.scenario).with_context(|| format!("reading {}", self.scenario))?;
            ScenarioConfig::from_toml(&text)?
        } else {
            presets::preset(&self.scenario)?
        };
        if self.pinned {
            s.nf = s.nf.pinned();
        }
        if self.noise {
            s.noise.enabled = true;
        }
        if let Some(b) = self.batch_ns {
            s.receiver.batch_interval_ns = b;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// TOML probe spec; overrides the probe flags.
    #[arg(long)]
    probe: Option<PathBuf>,
    #[arg(long, default_value_t = 5_000)]
    length: usize,
    /// Send rate; defaults to the scenario's nominal sender rate.
    #[arg(long)]
    rate: Option<f64>,
    /// Spread packets over this many flows.
    #[arg(long)]
    flows: Option<u64>,
    /// One-sided probe marking every g-th packet.
    #[arg(long)]
    gttl: Option<usize>,
    /// Expiry hop for one-sided probes; defaults to four hops past the NF.
    #[arg(long)]
    expire_hop: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct EstimateArgs {
    /// Trace written by `simulate`.
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value = "NFTY")]
    method: String,
    /// Use the trace's ICMP replies from this hop instead of receiver times.
    #[arg(long)]
    one_sided_hop: Option<usize>,
    #[arg(long, default_value_t = 3.0)]
    beta: f64,
    #[arg(long, default_value_t = 5)]
    min_seg: usize,
    /// Also write the dispersion series here.
    #[arg(long)]
    series_out: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct GroundTruthArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment TOML file.
    config: PathBuf,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the run count.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[command(flatten)]
    out: OutArgs,
}

fn emit(out: &OutArgs, text: &str) -> Result<()> {
    match &out.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r.context("writing stdout"),
        },
    }
}

fn plan(a: PlanArgs) -> Result<()> {
    let ctx = match &a.config {
        Some(p) => toml::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => PlanContext {
            threat_model: match a.threat {
                Threat::OneSided => ThreatModel::OneSided,
                Threat::TwoSided => ThreatModel::TwoSided,
            },
            dvfs_expected: match a.dvfs {
                Dvfs::Yes => DvfsKnowledge::Yes,
                Dvfs::No => DvfsKnowledge::No,
                Dvfs::Unknown => DvfsKnowledge::Unknown,
            },
            threads_k_est: a.threads,
            batch_interval_est_ns: a.batch_ns,
            g_ttl: a.gttl,
            c1: a.c1,
            c: a.c,
            dvfs_default_length: a.dvfs_length,
            send_rate_est_pps: a.send_rate,
        },
    };
    let r = plan_probe_length(&ctx)?;
    let kind = match r.probe_kind {
        ThreatModel::OneSided => "one_sided",
        ThreatModel::TwoSided => "two_sided",
    };
    emit(&a.out, &format!("length={}\nprobe_kind={kind}\nrationale={}\n", r.length, r.rationale_text()))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let scenario = a.scenario.load()?;
    let rate = a.rate.unwrap_or(scenario.sender.nominal_rate_pps);
    let probe: ProbeSpec = match &a.probe {
        Some(p) => toml::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => match a.gttl {
            Some(g) => {
                let hop = a.expire_hop.unwrap_or_else(|| probegen::default_expire_hop(&scenario.link));
                probegen::build_one_sided_probe(&scenario.link, a.length, g, hop, rate)?
            }
            None => {
                let policy = a.flows.map_or(FlowPolicy::SingleFlow, |n| FlowPolicy::Spray { n_flows: n });
                probegen::build_two_sided_probe(a.length, rate, policy)?
            }
        }
        .with_kind(scenario.packet_kind),
    };
    let trace = simcore::run_simulation(&scenario, &probe, a.seed)?;
    emit(&a.out, &simcore::write_trace(&trace))
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let method: Estimator = a.method.parse()?;
    if method == Estimator::Slops {
        bail!("SLOPS drives its own probes; run it through an experiment file");
    }
    let trace = simcore::read_trace(&fs::read_to_string(&a.trace).with_context(|| format!("reading {}", a.trace.display()))?)?;
    let series = match a.one_sided_hop {
        Some(hop) => {
            let replies: Vec<_> = trace.icmp_replies.iter().filter(|r| r.router_hop == hop).cloned().collect();
            dispersion::onesided_dispersion::<f64>(&replies)?
        }
        None => dispersion::dispersion_from_trace::<f64>(&trace, None)?,
    };
    if let Some(p) = &a.series_out {
        fs::write(p, dio::write_series(&series)).with_context(|| format!("writing {}", p.display()))?;
    }
    let params = StepDetectParams { penalty_beta: a.beta, min_seg: a.min_seg, ..StepDetectParams::default() };
    let report = match method {
        Estimator::Nfty => dispersion::nfty_estimate(&series, &params)?,
        other => dispersion::baseline_estimate(&series, other)?,
    }
    .with_packets_sent(trace.packets.len());
    emit(&a.out, &dio::write_report(&report))
}

fn ground_truth(a: GroundTruthArgs) -> Result<()> {
    let scenario = a.scenario.load()?;
    let cfg = FloodSearch { reps: a.reps, ..FloodSearch::default() };
    let gt = harness::ground_truth_flood_with(&scenario, a.seed, &cfg)?;
    let mut text = format!(
        "capacity_pps={:.3}\nanalytic_pps={:.3}\nlink_limited={}\n",
        gt.capacity_pps,
        harness::analytic_capacity(&scenario.nf),
        gt.link_limited
    );
    for (i, r) in gt.reps.iter().enumerate() {
        text.push_str(&format!("rep.{i}={r:.3}\n"));
    }
    for (k, v) in &gt.diagnostics {
        text.push_str(&format!("diag.{k}={v}\n"));
    }
    emit(&a.out, &text)
}

fn load_experiment(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut cfg = ExperimentConfig::from_toml(&text).with_context(|| format!("parsing {}", a.config.display()))?;
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    if let Some(r) = a.runs {
        cfg.runs = r;
        cfg.countermeasure_runs = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn render(table: &ResultsTable, format: Format) -> String {
    match format {
        Format::Csv => table.to_csv(),
        Format::Table => table.to_table(),
    }
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Plan(a) => plan(a),
        Cmd::Simulate(a) => simulate(a),
        Cmd::Estimate(a) => estimate(a),
        Cmd::GroundTruth(a) => ground_truth(a),
        Cmd::Experiment(a) => {
            let cfg = load_experiment(&a)?;
            emit(&a.out, &render(&harness::run_experiment(&cfg)?, a.format))
        }
        Cmd::Countermeasures(a) => {
            let cfg = load_experiment(&a)?;
            emit(&a.out, &render(&harness::eval_countermeasures(&cfg)?, a.format))
        }
    }
}
