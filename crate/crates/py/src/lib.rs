//! Python bindings for the shielded microgrid environment.
//!
//! `make(config)` returns an [`Env`] with the reset/step/close protocol RL
//! training loops expect. Observations are flat float lists whose field
//! order is given by `Env.observation_names` and frozen per
//! `OBS_LAYOUT_VERSION`; actions are `(delta, setpoint)` with delta
//! 0 = do nothing, 1 = start, 2 = stop and the battery setpoint in kW
//! (positive discharges).

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use scu_core::audit::audit;
use scu_core::config::Config;
use scu_core::degradation::online_costs;
use scu_core::degradation::oracle::offline_rainflow_oracle;
use scu_core::devices::GensetStatus;
use scu_core::env::{run_episode, EnvObservation, MicrogridEnv, OBS_LAYOUT_VERSION};
use scu_core::exogenous::{adversarial_series, load_series, synth_series, ExogenousSeries, MINUTES_PER_DAY};
use scu_core::metrics::{read_trajectory, MetricsRecord, TrajectoryRow};
use scu_core::policies::{Policy as NativePolicy, PolicyKind};
use scu_core::scu::{MicrogridAction, StatusCommand};
use scu_core::systems::{InitialState, ShieldSettings};
use scu_core::Error;

create_exception!(scu_microgrid, ConfigError, PyValueError, "Invalid configuration or initial state.");
create_exception!(scu_microgrid, ContractError, PyRuntimeError, "Operation called outside the environment protocol.");
create_exception!(scu_microgrid, InvariantError, PyRuntimeError, "A state the shields should prevent was reached.");

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::ContractViolation(_) => ContractError::new_err(msg),
        Error::InvariantFailure(_) => InvariantError::new_err(msg),
        Error::Io(_) => PyOSError::new_err(msg),
        _ => ConfigError::new_err(msg),
    }
}

/// Keys accepted by `make` and `run`.
pub const CONFIG_KEYS: [&str; 14] = [
    "seed",
    "data",
    "synth_seed",
    "adversarial",
    "days",
    "alpha",
    "episode_minutes",
    "start_minute",
    "device_shields",
    "recovery_shield",
    "unsafe",
    "config",
    "init_soc",
    "init_gensets",
];

/// Environment description assembled from a `make` mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    /// Environment seed; also the synthetic data seed unless `synth_seed` is set.
    pub seed: u64,
    pub data: Option<PathBuf>,
    pub synth_seed: Option<u64>,
    pub adversarial: bool,
    pub days: usize,
    pub alpha: Option<f64>,
    pub episode_minutes: Option<usize>,
    /// `None` samples a start minute on every reset.
    pub start_minute: Option<usize>,
    pub device_shields: bool,
    pub recovery_shield: bool,
    pub allow_unsafe: bool,
    pub config: Option<PathBuf>,
    pub init_soc: Option<f64>,
    pub init_gensets: Option<Vec<GensetStatus>>,
}

impl Default for EnvSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            data: None,
            synth_seed: None,
            adversarial: false,
            days: 1,
            alpha: None,
            episode_minutes: None,
            start_minute: None,
            device_shields: true,
            recovery_shield: true,
            allow_unsafe: false,
            config: None,
            init_soc: None,
            init_gensets: None,
        }
    }
}

/// Parses `off`, `warmup:N`, `on:N` or `cooldown:N` (case-insensitive).
pub fn parse_status(s: &str) -> Result<GensetStatus, Error> {
    let lower = s.trim().to_ascii_lowercase();
    if lower == "off" {
        return Ok(GensetStatus::Off);
    }
    let bad = || Error::Config(format!("genset status {s:?} is not off, warmup:N, on:N or cooldown:N"));
    let (kind, n) = lower.split_once(':').ok_or_else(bad)?;
    let n: u32 = n.trim().parse().map_err(|_| bad())?;
    match kind.trim() {
        "warmup" => Ok(GensetStatus::WarmUp(n)),
        "on" => Ok(GensetStatus::On(n)),
        "cooldown" => Ok(GensetStatus::CoolDown(n)),
        _ => Err(bad()),
    }
}

impl EnvSpec {
    pub fn series(&self) -> Result<ExogenousSeries, Error> {
        if self.days == 0 {
            return Err(Error::Config("days must be at least 1".into()));
        }
        match &self.data {
            Some(path) => load_series(path),
            None => {
                let seed = self.synth_seed.unwrap_or(self.seed);
                Ok(if self.adversarial { adversarial_series(seed, self.days) } else { synth_series(seed, self.days) })
            }
        }
    }

    pub fn file_config(&self) -> Result<Config, Error> {
        let mut config = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(alpha) = self.alpha {
            config.env.alpha = alpha;
        }
        Ok(config)
    }

    pub fn build(&self) -> Result<MicrogridEnv, Error> {
        if !self.device_shields && !self.allow_unsafe {
            return Err(Error::Config("device_shields=False requires unsafe=True".into()));
        }
        let config = self.file_config()?;
        let series = Arc::new(self.series()?);
        let shields = ShieldSettings { device: self.device_shields, recovery: self.recovery_shield };
        let mut env_config = config.env_config(&series, self.seed, shields);
        if let Some(n) = self.episode_minutes {
            env_config.episode_minutes = n;
        }
        env_config.start_minute = self.start_minute;
        env_config.init = match (self.init_soc, &self.init_gensets) {
            (None, None) => None,
            (Some(soc), Some(gensets)) => Some(InitialState { soc, gensets: gensets.clone() }),
            _ => return Err(Error::Config("init_soc and init_gensets must be given together".into())),
        };
        MicrogridEnv::new(env_config, series)
    }
}

fn spec_from(config: Option<&Bound<'_, PyDict>>) -> PyResult<EnvSpec> {
    let mut spec = EnvSpec::default();
    let Some(config) = config else {
        return Ok(spec);
    };
    for (key, value) in config.iter() {
        let key: String = key.extract()?;
        let bad = |e: PyErr| ConfigError::new_err(format!("{key}: {e}"));
        match key.as_str() {
            "seed" => spec.seed = value.extract().map_err(bad)?,
            "data" => spec.data = value.extract().map_err(bad)?,
            "synth_seed" => spec.synth_seed = value.extract().map_err(bad)?,
            "adversarial" => spec.adversarial = value.extract().map_err(bad)?,
            "days" => spec.days = value.extract().map_err(bad)?,
            "alpha" => spec.alpha = value.extract().map_err(bad)?,
            "episode_minutes" => spec.episode_minutes = value.extract().map_err(bad)?,
            "start_minute" => spec.start_minute = value.extract().map_err(bad)?,
            "device_shields" => spec.device_shields = value.extract().map_err(bad)?,
            "recovery_shield" => spec.recovery_shield = value.extract().map_err(bad)?,
            "unsafe" => spec.allow_unsafe = value.extract().map_err(bad)?,
            "config" => spec.config = value.extract().map_err(bad)?,
            "init_soc" => spec.init_soc = value.extract().map_err(bad)?,
            "init_gensets" => {
                let names: Vec<String> = value.extract().map_err(bad)?;
                let statuses = names.iter().map(|s| parse_status(s)).collect::<Result<Vec<_>, _>>().map_err(to_py)?;
                spec.init_gensets = Some(statuses);
            }
            other => {
                return Err(ConfigError::new_err(format!(
                    "unknown key {other:?}; expected one of {}",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
    }
    Ok(spec)
}

fn metrics_dict<'py>(py: Python<'py>, m: &MetricsRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("steps", m.steps)?;
    d.set_item("fuel_l", m.fuel_l)?;
    d.set_item("degradation", m.degradation)?;
    d.set_item("reward", m.reward)?;
    d.set_item("neg_balance_steps", m.neg_balance_steps)?;
    d.set_item("neg_balance_kwh", m.neg_balance_kwh)?;
    d.set_item("pos_balance_steps", m.pos_balance_steps)?;
    d.set_item("pos_balance_kwh", m.pos_balance_kwh)?;
    d.set_item("shield_interventions", m.shield_interventions)?;
    d.set_item("recovery_interventions", m.recovery_interventions)?;
    d.set_item("recovery_exhausted", m.recovery_exhausted)?;
    d.set_item("battery_reserve_minutes", m.battery_reserve_minutes)?;
    d.set_item("genset_overload_minutes", m.genset_overload_minutes)?;
    Ok(d)
}

fn row_into(d: &Bound<'_, PyDict>, row: &TrajectoryRow) -> PyResult<()> {
    d.set_item("minute", row.minute)?;
    d.set_item("demand", row.demand)?;
    d.set_item("wind_avail", row.wind_avail)?;
    d.set_item("p_wind", row.p_wind)?;
    d.set_item("p_batt", row.p_batt)?;
    d.set_item("soc", row.soc)?;
    d.set_item("p_gen", (row.p_gen1, row.p_gen2))?;
    d.set_item("status", (row.status1.as_str(), row.status2.as_str()))?;
    d.set_item("balance", row.balance)?;
    d.set_item("intervention", row.intervention.as_str())?;
    Ok(())
}

/// One shielded microgrid environment.
#[pyclass(module = "scu_microgrid")]
pub struct Env {
    inner: MicrogridEnv,
    last: Option<EnvObservation>,
    names: Vec<String>,
}

#[pymethods]
impl Env {
    /// Starts an episode and returns the first observation.
    fn reset(&mut self) -> PyResult<Vec<f64>> {
        let obs = self.inner.reset().map_err(to_py)?;
        let v = obs.to_vec();
        self.last = Some(obs);
        Ok(v)
    }

    /// Plays one minute. Returns `(observation, reward, done, info)` where
    /// `info` holds this step's metrics and trajectory row.
    fn step<'py>(&mut self, py: Python<'py>, action: (i64, f64)) -> PyResult<(Vec<f64>, f64, bool, Bound<'py, PyDict>)> {
        let (delta, setpoint) = action;
        let delta_orch = StatusCommand::from_index(delta)
            .ok_or_else(|| ContractError::new_err(format!("delta must be 0, 1 or 2, got {delta}")))?;
        let r = self.inner.step(MicrogridAction { delta_orch, p_batt_setpoint: setpoint }).map_err(to_py)?;
        let info = metrics_dict(py, &r.metrics)?;
        row_into(&info, &r.row)?;
        info.set_item("latency_s", r.latency_s)?;
        let v = r.observation.to_vec();
        self.last = Some(r.observation);
        Ok((v, r.reward, r.done, info))
    }

    /// Drops the episode state; `reset` starts a new one.
    fn close(&mut self) {
        self.inner.close();
        self.last = None;
    }

    #[getter]
    fn done(&self) -> bool {
        self.inner.is_done()
    }

    #[getter]
    fn observation_names(&self) -> Vec<String> {
        self.names.clone()
    }

    #[getter]
    fn observation_size(&self) -> usize {
        self.names.len()
    }

    #[getter]
    fn episode_minutes(&self) -> usize {
        self.inner.config().episode_minutes
    }

    #[getter]
    fn start_minute(&self) -> usize {
        self.inner.start_minute()
    }

    /// Metrics accumulated over the current episode.
    fn totals<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        metrics_dict(py, self.inner.totals())
    }
}

/// A baseline controller acting on an [`Env`]'s latest observation.
#[pyclass(module = "scu_microgrid")]
pub struct Policy {
    inner: NativePolicy,
}

#[pymethods]
impl Policy {
    /// `name` is random, battery-greedy, fuel-greedy, greedy or heuristic.
    #[new]
    #[pyo3(signature = (name, seed = 0))]
    fn new(name: &str, seed: u64) -> PyResult<Self> {
        let kind: PolicyKind = name.parse().map_err(to_py)?;
        Ok(Self { inner: NativePolicy::new(kind, seed, Config::default().heuristic) })
    }

    fn act(&mut self, env: &Env) -> PyResult<(u8, f64)> {
        let obs = env.last.as_ref().ok_or_else(|| ContractError::new_err("environment not reset"))?;
        let a = self.inner.act(obs);
        Ok((a.delta_orch.index(), a.p_batt_setpoint))
    }
}

/// Builds an environment from a mapping of the keys in `CONFIG_KEYS`.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn make(config: Option<&Bound<'_, PyDict>>) -> PyResult<Env> {
    let inner = spec_from(config)?.build().map_err(to_py)?;
    let p = inner.config().params;
    let names = EnvObservation::layout(p.gensets, p.battery.degradation.buffer_capacity());
    Ok(Env { inner, last: None, names })
}

/// Plays one full episode natively and returns its metrics and rewards.
#[pyfunction]
#[pyo3(signature = (policy, config = None))]
fn run<'py>(py: Python<'py>, policy: &str, config: Option<&Bound<'py, PyDict>>) -> PyResult<Bound<'py, PyDict>> {
    let spec = spec_from(config)?;
    let kind: PolicyKind = policy.parse().map_err(to_py)?;
    let mut env = spec.build().map_err(to_py)?;
    let heuristic = spec.file_config().map_err(to_py)?.heuristic;
    let mut native = NativePolicy::new(kind, spec.seed, heuristic);
    let out = py.detach(|| run_episode(&mut env, &mut native)).map_err(to_py)?;
    let d = metrics_dict(py, &out.metrics)?;
    d.set_item("rewards", out.rows.iter().map(|r| r.reward).collect::<Vec<_>>())?;
    Ok(d)
}

/// Demand and wind availability (kW per minute) of a synthetic series.
#[pyfunction]
#[pyo3(signature = (seed, days = 1, adversarial = false))]
fn synthetic_series(seed: u64, days: usize, adversarial: bool) -> (Vec<f64>, Vec<f64>) {
    let s = if adversarial { adversarial_series(seed, days) } else { synth_series(seed, days) };
    (s.demand, s.wind_avail)
}

/// Violation count per constraint of a trajectory CSV, plus `rows`.
#[pyfunction]
fn audit_trajectory<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let rows = read_trajectory(&path).map_err(to_py)?;
    let report = audit(&rows, &Config::default().audit);
    let d = PyDict::new(py);
    d.set_item("rows", report.rows)?;
    for c in &report.counts {
        d.set_item(c.constraint.name(), c.violations)?;
    }
    Ok(d)
}

/// Online and offline degradation totals of a SoC trace.
#[pyfunction]
#[pyo3(signature = (trace, window = 0.01))]
fn rainflow(trace: Vec<f64>, window: f64) -> PyResult<(f64, f64)> {
    let mut params = Config::default().battery.degradation;
    params.window = window;
    params.validate().map_err(to_py)?;
    let online = online_costs(&trace, &params).iter().fold(0.0, |acc, c| acc + c);
    let offline = offline_rainflow_oracle(&trace, &params).map_err(to_py)?;
    Ok((online, offline))
}

#[pymodule]
fn scu_microgrid(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("OBS_LAYOUT_VERSION", OBS_LAYOUT_VERSION)?;
    m.add("MINUTES_PER_DAY", MINUTES_PER_DAY)?;
    m.add("ACTION_SETPOINT_BOUNDS", (-600.0, 600.0))?;
    m.add("CONFIG_KEYS", CONFIG_KEYS.to_vec())?;
    m.add("POLICIES", PolicyKind::ALL.map(PolicyKind::name).to_vec())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("ContractError", py.get_type::<ContractError>())?;
    m.add("InvariantError", py.get_type::<InvariantError>())?;
    m.add_class::<Env>()?;
    m.add_class::<Policy>()?;
    m.add_function(wrap_pyfunction!(make, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_series, m)?)?;
    m.add_function(wrap_pyfunction!(audit_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(rainflow, m)?)?;
    Ok(())
}
