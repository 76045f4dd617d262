//! Command-line front end of the `scu` binary.
//!
//! Exit codes: 0 on success, 1 when an invariant fails (including audit
//! violations and shortages in a fully shielded run), 2 on usage, input or
//! configuration errors.

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::audit::audit;
use crate::config::Config;
use crate::degradation::online_costs;
use crate::degradation::oracle::offline_rainflow_oracle;
use crate::env::{run_episode, MicrogridEnv};
use crate::error::{Error, Result};
use crate::exogenous::{adversarial_series, load_series, synth_series, ExogenousSeries, MINUTES_PER_DAY};
use crate::metrics::{read_trajectory, write_json, write_trajectory, EpisodeSummary, LatencyStats, MetricsRecord};
use crate::policies::{Policy, PolicyKind};
use crate::systems::ShieldSettings;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "scu", version, about = "Shielded microgrid simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a policy and write trajectories and summaries.
    Run(RunArgs),
    /// Re-check every operational constraint of a trajectory CSV.
    Audit(AuditArgs),
    /// Write a synthetic demand and wind series.
    GenData(GenDataArgs),
    /// Compare online degradation costs with the offline rainflow count.
    Rainflow(RainflowArgs),
    /// Print the default configuration.
    Config,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// random, battery-greedy, fuel-greedy, greedy or heuristic.
    #[arg(long)]
    pub policy: PolicyKind,
    /// Exogenous series CSV (minute,demand_kw,wind_avail_kw).
    #[arg(long, conflicts_with = "synth_seed")]
    pub data: Option<PathBuf>,
    /// Synthetic data seeds, one run each (comma separated). Default 0.
    #[arg(long, value_delimiter = ',')]
    pub synth_seed: Vec<u64>,
    /// Use the adversarial synthetic generator.
    #[arg(long, conflicts_with = "data")]
    pub adversarial: bool,
    /// Environment and policy seeds when running on a data file.
    #[arg(long, value_delimiter = ',', requires = "data")]
    pub seed: Vec<u64>,
    /// Length of the single continuous episode, in days.
    #[arg(long, default_value_t = 1)]
    pub days: usize,
    /// Weight of degradation against fuel; overrides the configuration.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Disable battery and genset shields (needs --unsafe).
    #[arg(long)]
    pub no_device_shields: bool,
    #[arg(long)]
    pub no_recovery_shield: bool,
    /// Acknowledge that the run may violate operational constraints.
    #[arg(long = "unsafe")]
    pub allow_unsafe: bool,
    /// Parallel runs (default: one per core).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    pub trajectory: PathBuf,
    /// Audit limits are read from the [audit] section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub days: usize,
    #[arg(long)]
    pub adversarial: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RainflowArgs {
    /// SoC trace: one value per line, or a trajectory CSV with a `soc` column.
    pub trace: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Discretization window; overrides the configuration.
    #[arg(long)]
    pub window: Option<f64>,
    /// Also print every per-step cost.
    #[arg(long)]
    pub per_step: bool,
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        // the reader went away (e.g. `| head`); nothing left to report
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvariantFailure(_) => EXIT_INVARIANT,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Run(a) => cmd_run(&a),
        Command::Audit(a) => cmd_audit(&a),
        Command::GenData(a) => cmd_gen_data(&a).map(|()| EXIT_OK),
        Command::Rainflow(a) => cmd_rainflow(&a).map(|()| EXIT_OK),
        Command::Config => {
            write!(std::io::stdout(), "{}", Config::default().to_toml())?;
            Ok(EXIT_OK)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    path.map_or_else(|| Ok(Config::default()), Config::load)
}

/// Merged summary of a `run` invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub runs: Vec<EpisodeSummary>,
    pub totals: MetricsRecord,
}

struct RunJob {
    seed: u64,
    series: Arc<ExogenousSeries>,
}

pub fn cmd_run(a: &RunArgs) -> Result<i32> {
    if a.no_device_shields && !a.allow_unsafe {
        return Err(Error::Config("--no-device-shields requires --unsafe".into()));
    }
    if a.days == 0 {
        return Err(Error::Config("--days must be at least 1".into()));
    }
    let mut config = load_config(a.config.as_deref())?;
    if let Some(alpha) = a.alpha {
        config.env.alpha = alpha;
    }
    let shields = ShieldSettings { device: !a.no_device_shields, recovery: !a.no_recovery_shield };
    let minutes = a.days * MINUTES_PER_DAY;

    let jobs: Vec<RunJob> = match &a.data {
        Some(path) => {
            let series = Arc::new(load_series(path)?);
            let seeds = if a.seed.is_empty() { vec![0] } else { a.seed.clone() };
            seeds.into_iter().map(|seed| RunJob { seed, series: Arc::clone(&series) }).collect()
        }
        None => {
            let seeds = if a.synth_seed.is_empty() { vec![0] } else { a.synth_seed.clone() };
            seeds
                .into_iter()
                .map(|seed| {
                    let series = if a.adversarial { adversarial_series(seed, a.days) } else { synth_series(seed, a.days) };
                    RunJob { seed, series: Arc::new(series) }
                })
                .collect()
        }
    };
    fs::create_dir_all(&a.out)?;

    let run_one = |job: &RunJob| -> Result<EpisodeSummary> {
        let mut env_config = config.env_config(&job.series, job.seed, shields);
        env_config.episode_minutes = minutes;
        env_config.start_minute = Some(0);
        let mut env = MicrogridEnv::new(env_config, Arc::clone(&job.series))?;
        let mut policy = Policy::new(a.policy, job.seed, config.heuristic);
        let out = run_episode(&mut env, &mut policy)?;
        let stem = format!("{}_seed{}", a.policy, job.seed);
        write_trajectory(&a.out.join(format!("{stem}.csv")), &out.rows)?;
        let summary = EpisodeSummary {
            policy: a.policy.to_string(),
            seed: job.seed,
            minutes: minutes as u64,
            alpha: config.env.alpha,
            device_shields: shields.device,
            recovery_shield: shields.recovery,
            metrics: out.metrics,
            latency: LatencyStats::from_samples(&out.latencies).ok(),
        };
        write_json(&a.out.join(format!("{stem}.json")), &summary)?;
        Ok(summary)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let runs = pool.install(|| jobs.par_iter().map(run_one).collect::<Result<Vec<_>>>())?;

    let mut totals = MetricsRecord::default();
    for r in &runs {
        totals.accumulate(&r.metrics);
        writeln!(
            std::io::stdout(),
            "{} seed {}: fuel {:.1} l, degradation {:.3}, reward {:.1}, shortage minutes {}, surplus minutes {}, interventions {}",
            r.policy,
            r.seed,
            r.metrics.fuel_l,
            r.metrics.degradation,
            r.metrics.reward,
            r.metrics.neg_balance_steps,
            r.metrics.pos_balance_steps,
            r.metrics.shield_interventions
        )?;
    }
    let summary = RunSummary { runs, totals };
    write_json(&a.out.join("summary.json"), &summary)?;
    if shields.device && shields.recovery && totals.neg_balance_steps > 0 {
        eprintln!("error: fully shielded run ran short of power in {} minutes", totals.neg_balance_steps);
        return Ok(EXIT_INVARIANT);
    }
    Ok(EXIT_OK)
}

pub fn cmd_audit(a: &AuditArgs) -> Result<i32> {
    let config = load_config(a.config.as_deref())?;
    let rows = read_trajectory(&a.trajectory)?;
    let report = audit(&rows, &config.audit);
    let mut out = std::io::stdout().lock();
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        writeln!(out, "{report}")?;
    }
    Ok(if report.is_clean() { EXIT_OK } else { EXIT_INVARIANT })
}

pub fn cmd_gen_data(a: &GenDataArgs) -> Result<()> {
    if a.days == 0 {
        return Err(Error::Config("--days must be at least 1".into()));
    }
    let series = if a.adversarial { adversarial_series(a.seed, a.days) } else { synth_series(a.seed, a.days) };
    series.write_csv(&a.out)
}

/// Reads a SoC trace: bare numbers one per line (a non-numeric first line is
/// a header), or a CSV whose header has a `soc` column.
pub fn read_soc_trace(path: &Path) -> Result<Vec<f64>> {
    let file = fs::File::open(path)?;
    let mut column = None;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if i == 0 && fields[0].parse::<f64>().is_err() {
            column = fields.iter().position(|f| *f == "soc").or((fields.len() == 1).then_some(0));
            if column.is_none() {
                return Err(Error::Parse { path: path.to_path_buf(), line: 1, message: "no soc column".into() });
            }
            continue;
        }
        let field = fields.get(column.unwrap_or(0)).copied().unwrap_or("");
        let v: f64 = field.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("not a number: {field:?}"),
        })?;
        out.push(v);
    }
    Ok(out)
}

pub fn cmd_rainflow(a: &RainflowArgs) -> Result<()> {
    let config = load_config(a.config.as_deref())?;
    let mut params = config.battery.degradation;
    if let Some(w) = a.window {
        params.window = w;
    }
    params.validate()?;
    let trace = read_soc_trace(&a.trace)?;
    let costs = online_costs(&trace, &params);
    let mut out = std::io::stdout().lock();
    if a.per_step {
        for (i, c) in costs.iter().enumerate() {
            writeln!(out, "{} {c}", i + 1)?;
        }
    }
    let online = costs.iter().fold(0.0, |acc, c| acc + c);
    let oracle = offline_rainflow_oracle(&trace, &params)?;
    let gap = if oracle > 0.0 { (online - oracle).abs() / oracle } else { 0.0 };
    writeln!(out, "samples: {}", trace.len())?;
    writeln!(out, "online:  {online}")?;
    writeln!(out, "offline: {oracle}")?;
    writeln!(out, "relative gap: {gap}")?;
    Ok(())
}
