//! Decision process over the microgrid SCU: episodes, observations, reward
//! and per-step accounting.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::devices::{DeviceState, GensetStatus, PhaseLabel};
use crate::error::{contract, Error, Result};
use crate::exogenous::{forecast_at, ExogenousSeries, ForecastKind, ForecastNoise, FORECAST_POINTS, MINUTES_PER_DAY};
use crate::metrics::{InterventionFlags, MetricsRecord, TrajectoryRow};
use crate::scu::{ActionBundle, Exogenous, MicrogridAction, Observation, ScuNode, Shield, StatusCommand};
use crate::systems::{
    build_microgrid, rollout_shortage, InitialState, MicrogridParams, MicrogridShieldConfig, RecoveryScenario,
    Scenario, ShieldSettings,
};

/// Version of the flat observation layout returned by [`EnvObservation::to_vec`].
pub const OBS_LAYOUT_VERSION: u32 = 1;

/// Generation minus demand counted as zero (kW).
pub const BALANCE_EPS: f64 = 1e-9;

/// Optional reward penalties (both zero by default).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Penalties {
    /// Per step where a shield modified the action.
    pub intervention: f64,
    /// Per kW of negative balance.
    pub shortage_per_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub params: MicrogridParams,
    pub shields: ShieldSettings,
    /// Weight of battery degradation against fuel in the reward.
    pub alpha: f64,
    pub episode_minutes: usize,
    /// First minute of the episode in the series; sampled when `None`.
    pub start_minute: Option<usize>,
    /// Initial physical state; sampled (and checked for recoverability)
    /// when `None`.
    pub init: Option<InitialState>,
    pub seed: u64,
    pub forecast_noise: ForecastNoise,
    /// Recovery rollout inputs; derived from the series when `None`.
    pub scenario: Option<RecoveryScenario>,
    pub penalties: Penalties,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            params: MicrogridParams::default(),
            shields: ShieldSettings::default(),
            alpha: 1.0,
            episode_minutes: MINUTES_PER_DAY,
            start_minute: None,
            init: None,
            seed: 0,
            forecast_noise: ForecastNoise::default(),
            scenario: None,
            penalties: Penalties::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(1..=2).contains(&self.params.gensets) {
            return Err(Error::Config(format!(
                "the environment supports 1 or 2 gensets, got {}",
                self.params.gensets
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if self.episode_minutes == 0 {
            return Err(Error::Config("episode length must be at least one minute".into()));
        }
        if self.forecast_noise.sigma_kw.is_nan() || self.forecast_noise.sigma_kw < 0.0 {
            return Err(Error::Config("forecast noise must be >= 0".into()));
        }
        if let Some(s) = &self.scenario {
            s.validate()?;
        }
        Ok(())
    }
}

/// Per-genset part of the observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GensetObs {
    pub status: GensetStatus,
    pub p_out: f64,
    /// min(nominal, rolling-average cap) for the next minute.
    pub available_kw: f64,
    /// Average of the rolling operating-power window.
    pub avg_kw: f64,
}

/// What the agent sees before choosing the action for minute `minute`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvObservation {
    /// Minutes elapsed in the episode.
    pub minute: usize,
    pub minute_of_day: usize,
    /// Demand and available wind of the minute about to be played.
    pub demand: f64,
    pub wind_avail: f64,
    pub soc: f64,
    pub p_batt: f64,
    pub p_wind: f64,
    pub gensets: Vec<GensetObs>,
    pub demand_forecast: [f64; FORECAST_POINTS],
    pub wind_forecast: [f64; FORECAST_POINTS],
    /// Rainflow switching points of the battery.
    pub rainflow: Vec<f64>,
    /// Slots reserved for `rainflow` in the flat layout.
    pub rainflow_capacity: usize,
}

impl EnvObservation {
    /// Flat numeric layout, version [`OBS_LAYOUT_VERSION`]; see
    /// [`EnvObservation::layout`] for field names.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![
            self.minute_of_day as f64,
            self.demand,
            self.wind_avail,
            self.soc,
            self.p_batt,
            self.p_wind,
        ];
        for g in &self.gensets {
            v.extend([g.status.code() as f64, g.status.counter() as f64, g.p_out, g.available_kw, g.avg_kw]);
        }
        v.extend(self.demand_forecast);
        v.extend(self.wind_forecast);
        v.push(self.rainflow.len() as f64);
        v.extend(self.rainflow.iter().take(self.rainflow_capacity));
        v.resize(v.len() + self.rainflow_capacity.saturating_sub(self.rainflow.len()), 0.0);
        v
    }

    /// Field names of the flat layout.
    pub fn layout(gensets: usize, rainflow_capacity: usize) -> Vec<String> {
        let mut names: Vec<String> = ["minute_of_day", "demand_kw", "wind_avail_kw", "soc", "p_batt_kw", "p_wind_kw"]
            .map(String::from)
            .to_vec();
        for i in 1..=gensets {
            for f in ["status", "counter", "p_kw", "available_kw", "avg_kw"] {
                names.push(format!("gen{i}_{f}"));
            }
        }
        names.extend((1..=FORECAST_POINTS).map(|k| format!("demand_fc_{k}")));
        names.extend((1..=FORECAST_POINTS).map(|k| format!("wind_fc_{k}")));
        names.push("rainflow_len".into());
        names.extend((0..rainflow_capacity).map(|k| format!("rainflow_{k}")));
        names
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: EnvObservation,
    pub reward: f64,
    pub done: bool,
    pub metrics: MetricsRecord,
    pub row: TrajectoryRow,
    /// Wall time of the SCU tree step (seconds).
    pub latency_s: f64,
}

pub struct MicrogridEnv {
    config: EnvConfig,
    series: Arc<ExogenousSeries>,
    scenario: RecoveryScenario,
    rng: ChaCha8Rng,
    tree: Option<ScuNode>,
    start: usize,
    t: usize,
    totals: MetricsRecord,
}

impl MicrogridEnv {
    pub fn new(config: EnvConfig, series: Arc<ExogenousSeries>) -> Result<Self> {
        config.validate()?;
        series.validate()?;
        if series.is_empty() {
            return Err(Error::Config("empty exogenous series".into()));
        }
        let scenario = config.scenario.unwrap_or_else(|| series.recovery_scenario(9));
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            series,
            scenario,
            tree: None,
            start: 0,
            t: 0,
            totals: MetricsRecord::default(),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn scenario(&self) -> &RecoveryScenario {
        &self.scenario
    }

    pub fn tree(&self) -> Option<&ScuNode> {
        self.tree.as_ref()
    }

    pub fn totals(&self) -> &MetricsRecord {
        &self.totals
    }

    pub fn start_minute(&self) -> usize {
        self.start
    }

    pub fn is_done(&self) -> bool {
        self.tree.is_none() || self.t >= self.config.episode_minutes
    }

    /// Starts a new episode and returns its first observation.
    pub fn reset(&mut self) -> Result<EnvObservation> {
        self.start = match self.config.start_minute {
            Some(s) => s % self.series.len(),
            None => self.rng.random_range(0..self.series.len()),
        };
        let exo = self.series.at(self.start);
        let tree = match self.config.init.clone() {
            Some(init) => {
                let tree = self.build(&init)?;
                if !self.recoverable(&tree, &exo)? {
                    return Err(Error::InitialState(format!("{init:?} cannot cover demand at minute {}", self.start)));
                }
                tree
            }
            None => self.sample_tree(&exo)?,
        };
        self.tree = Some(tree);
        self.t = 0;
        self.totals = MetricsRecord::default();
        self.observe()
    }

    fn build(&self, init: &InitialState) -> Result<ScuNode> {
        build_microgrid(&self.config.params, init, self.config.shields, self.scenario)
    }

    fn sample_tree(&mut self, exo: &Exogenous) -> Result<ScuNode> {
        for _ in 0..1000 {
            let init = sample_initial_state(&mut self.rng, &self.config.params);
            let tree = self.build(&init)?;
            if self.recoverable(&tree, exo)? {
                return Ok(tree);
            }
        }
        Err(Error::InitialState("no recoverable initial state found in 1000 draws".into()))
    }

    /// Doing nothing from this state passes both recovery rollouts.
    fn recoverable(&self, tree: &ScuNode, exo: &Exogenous) -> Result<bool> {
        let config = MicrogridShieldConfig { recovery: None, reserves_allowed: true };
        let first = MicrogridAction { delta_orch: StatusCommand::DoNothing, p_batt_setpoint: 0.0 };
        for which in [Scenario::WorstCase, Scenario::Steady] {
            let s = rollout_shortage(&self.scenario, &config, &tree.controller, first, exo, which, true)?;
            if s > 0.0 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn observe(&self) -> Result<EnvObservation> {
        let tree = self.tree.as_ref().ok_or_else(|| contract("environment not reset"))?;
        let abs = self.start + self.t;
        let exo = self.series.at(abs);
        let estimate = tree.controller.dt.estimate();
        let devices = estimate.devices();
        let battery = estimate.battery().ok_or_else(|| contract("no battery in the tree"))?;
        let p_wind = devices.iter().find_map(|d| d.as_wind()).map_or(0.0, |w| w.p_out);
        let gensets = estimate
            .gensets()
            .iter()
            .map(|g| GensetObs {
                status: g.status,
                p_out: g.p_out,
                available_kw: g.available_cap(false),
                avg_kw: g.history.average().unwrap_or(0.0),
            })
            .collect();
        Ok(EnvObservation {
            minute: self.t,
            minute_of_day: abs % MINUTES_PER_DAY,
            demand: exo.demand,
            wind_avail: exo.wind_avail,
            soc: battery.soc,
            p_batt: battery.p_out,
            p_wind,
            gensets,
            demand_forecast: forecast_at(&self.series, abs, ForecastKind::Demand, self.config.forecast_noise),
            wind_forecast: forecast_at(&self.series, abs, ForecastKind::Wind, self.config.forecast_noise),
            rainflow: battery.rainflow.points().to_vec(),
            rainflow_capacity: battery.params.degradation.buffer_capacity(),
        })
    }

    /// Plays one minute.
    pub fn step(&mut self, action: MicrogridAction) -> Result<StepResult> {
        if self.is_done() {
            return Err(contract("step called on a finished or unreset episode"));
        }
        if !action.p_batt_setpoint.is_finite() {
            return Err(contract(format!("battery setpoint {} is not finite", action.p_batt_setpoint)));
        }
        let exo = self.series.at(self.start + self.t);
        let tree = self.tree.as_mut().expect("checked by is_done");
        let clock = Instant::now();
        let obs = tree.step(&ActionBundle::Microgrid(action), &exo)?;
        let latency_s = clock.elapsed().as_secs_f64();
        let note = tree.last_note;

        let summary = StepSummary::from_observation(&obs, &exo)?;
        let flags = InterventionFlags {
            recovery: note.recovery_replaced,
            reserve: note.reserve,
            overload: note.overload,
            exhausted: note.recovery_exhausted,
        };
        let shortage = (-summary.balance).max(0.0);
        let penalty = self.config.penalties.intervention * f64::from(u8::from(note.intervened))
            + self.config.penalties.shortage_per_kw * shortage;
        let reward = -(summary.fuel_l + self.config.alpha * summary.degradation) - penalty;
        let metrics = MetricsRecord {
            steps: 1,
            fuel_l: summary.fuel_l,
            degradation: summary.degradation,
            reward,
            neg_balance_steps: u64::from(summary.balance < -BALANCE_EPS),
            neg_balance_kwh: shortage / 60.0,
            pos_balance_steps: u64::from(summary.balance > BALANCE_EPS),
            pos_balance_kwh: summary.balance.max(0.0) / 60.0,
            shield_interventions: u64::from(note.intervened),
            recovery_interventions: u64::from(note.recovery_replaced),
            recovery_exhausted: u64::from(note.recovery_exhausted),
            battery_reserve_minutes: u64::from(note.reserve),
            genset_overload_minutes: u64::from(note.overload),
        };
        self.totals.accumulate(&metrics);
        let phase = |i: usize| summary.phases.get(i).map_or(PhaseLabel::OFF, |p| *p).to_string();
        let row = TrajectoryRow {
            minute: self.t as u64,
            demand: exo.demand,
            wind_avail: exo.wind_avail,
            p_wind: summary.p_wind,
            p_batt: summary.p_batt,
            soc: summary.soc,
            p_gen1: summary.p_gen.first().copied().unwrap_or(0.0),
            p_gen2: summary.p_gen.get(1).copied().unwrap_or(0.0),
            status1: phase(0),
            status2: phase(1),
            fuel_l: summary.fuel_l,
            deg: summary.degradation,
            reward,
            balance: summary.balance,
            intervention: flags.encode(),
        };
        self.t += 1;
        Ok(StepResult {
            observation: self.observe()?,
            reward,
            done: self.is_done(),
            metrics,
            row,
            latency_s,
        })
    }

    /// Releases the SCU tree; `reset` starts a new episode.
    pub fn close(&mut self) {
        self.tree = None;
    }
}

/// Device outputs of one step, read from the state estimation.
struct StepSummary {
    p_wind: f64,
    p_batt: f64,
    soc: f64,
    p_gen: Vec<f64>,
    phases: Vec<PhaseLabel>,
    fuel_l: f64,
    degradation: f64,
    balance: f64,
}

impl StepSummary {
    fn from_observation(obs: &Observation, exo: &Exogenous) -> Result<Self> {
        let mut s = StepSummary {
            p_wind: 0.0,
            p_batt: 0.0,
            soc: 0.0,
            p_gen: Vec::new(),
            phases: Vec::new(),
            fuel_l: 0.0,
            degradation: 0.0,
            balance: 0.0,
        };
        for d in obs.devices() {
            match d {
                DeviceState::Wind(w) => s.p_wind = w.p_out,
                DeviceState::Battery(b) => {
                    s.p_batt = b.p_out;
                    s.soc = b.soc;
                    s.degradation = b.last_degradation;
                }
                DeviceState::Genset(g) => {
                    s.p_gen.push(g.p_out);
                    s.phases.push(g.last_phase);
                    s.fuel_l += g.last_fuel;
                }
            }
        }
        if s.p_gen.is_empty() {
            return Err(contract("no genset in the observation"));
        }
        s.balance = s.p_wind + s.p_batt + s.p_gen.iter().sum::<f64>() - exo.demand;
        Ok(s)
    }
}

/// Random initial state: SoC uniform in the normal band, gensets off or on
/// (runtime up to two hours) in priority order.
pub fn sample_initial_state(rng: &mut ChaCha8Rng, params: &MicrogridParams) -> InitialState {
    let b = &params.battery;
    let soc = rng.random_range(b.soc_min..=b.soc_max);
    let mut gensets = Vec::with_capacity(params.gensets);
    let mut previous_on = true;
    for i in 0..params.gensets {
        let p_on = if i == 0 { 0.7 } else { 0.3 };
        let on = previous_on && rng.random_bool(p_on);
        gensets.push(if on { GensetStatus::On(rng.random_range(0..120)) } else { GensetStatus::Off });
        previous_on = on;
    }
    InitialState { soc, gensets }
}

/// Whether every shield of the tree is the one a fully shielded run uses.
pub fn fully_shielded(tree: &ScuNode) -> bool {
    let own = match &tree.shield {
        Shield::Microgrid(c) => c.recovery.is_some(),
        s => s.enforces(),
    };
    own && tree.children().iter().all(fully_shielded)
}

/// Everything produced by one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutput {
    pub metrics: MetricsRecord,
    pub rows: Vec<TrajectoryRow>,
    /// Wall time of each SCU tree step (seconds).
    pub latencies: Vec<f64>,
}

/// Resets `env` and plays a full episode with `policy`.
pub fn run_episode(env: &mut MicrogridEnv, policy: &mut crate::policies::Policy) -> Result<EpisodeOutput> {
    let mut obs = env.reset()?;
    let n = env.config().episode_minutes;
    let mut rows = Vec::with_capacity(n);
    let mut latencies = Vec::with_capacity(n);
    loop {
        let step = env.step(policy.act(&obs))?;
        rows.push(step.row);
        latencies.push(step.latency_s);
        if step.done {
            break;
        }
        obs = step.observation;
    }
    Ok(EpisodeOutput { metrics: *env.totals(), rows, latencies })
}
