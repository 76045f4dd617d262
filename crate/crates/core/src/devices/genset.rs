use std::fmt;

use im::Vector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scu::{GensetAction, StatusCommand};

const MINUTES_PER_HOUR: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GensetParams {
    pub p_min_kw: f64,
    pub p_nominal_kw: f64,
    /// Absolute maximum, reachable only with overload authorization.
    pub p_max_kw: f64,
    pub warmup_minutes: u32,
    pub warmup_power_kw: f64,
    pub cooldown_minutes: u32,
    pub min_runtime_minutes: u32,
    /// Cap on the rolling average power, as a fraction of nominal.
    pub avg_cap_fraction: f64,
    /// Length of the rolling window, counted in operating minutes.
    pub avg_window_minutes: usize,
    pub fuel_l_per_kwh: f64,
    pub fuel_idle_l_per_h: f64,
}

impl Default for GensetParams {
    fn default() -> Self {
        Self {
            p_min_kw: 120.0,
            p_nominal_kw: 400.0,
            p_max_kw: 440.0,
            warmup_minutes: 3,
            warmup_power_kw: 100.0,
            cooldown_minutes: 5,
            min_runtime_minutes: 30,
            avg_cap_fraction: 0.7,
            avg_window_minutes: 48 * 60,
            fuel_l_per_kwh: 0.25,
            fuel_idle_l_per_h: 10.0,
        }
    }
}

impl GensetParams {
    pub fn avg_cap_kw(&self) -> f64 {
        self.avg_cap_fraction * self.p_nominal_kw
    }

    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.p_min_kw
            && self.p_min_kw < self.avg_cap_kw()
            && self.avg_cap_kw() <= self.p_nominal_kw
            && self.p_nominal_kw <= self.p_max_kw
            && self.warmup_minutes > 0
            && self.cooldown_minutes > 0
            && self.avg_window_minutes > 0
            && self.fuel_l_per_kwh >= 0.0
            && self.fuel_idle_l_per_h >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("inconsistent genset parameters: {self:?}")))
        }
    }
}

/// Status machine position. Counters are whole minutes: remaining minutes
/// of a routine, or minutes already run while on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GensetStatus {
    Off,
    WarmUp(u32),
    On(u32),
    CoolDown(u32),
}

impl GensetStatus {
    pub fn is_off(self) -> bool {
        matches!(self, GensetStatus::Off)
    }

    /// Warming up or on: committed to producing power.
    pub fn is_committed(self) -> bool {
        matches!(self, GensetStatus::WarmUp(_) | GensetStatus::On(_))
    }

    pub fn code(self) -> u8 {
        match self {
            GensetStatus::Off => 0,
            GensetStatus::WarmUp(_) => 1,
            GensetStatus::On(_) => 2,
            GensetStatus::CoolDown(_) => 3,
        }
    }

    pub fn counter(self) -> u32 {
        match self {
            GensetStatus::Off => 0,
            GensetStatus::WarmUp(n) | GensetStatus::On(n) | GensetStatus::CoolDown(n) => n,
        }
    }

    /// Status in force during a minute that starts with `cmd` already
    /// accepted by the shield.
    pub fn with_command(self, cmd: StatusCommand, params: &GensetParams) -> Self {
        match (self, cmd) {
            (GensetStatus::Off, StatusCommand::Start) => GensetStatus::WarmUp(params.warmup_minutes),
            (GensetStatus::On(_), StatusCommand::Stop) => GensetStatus::CoolDown(params.cooldown_minutes),
            (status, _) => status,
        }
    }

    /// Status after one minute spent in `self`.
    pub fn advanced(self) -> Self {
        match self {
            GensetStatus::Off => GensetStatus::Off,
            GensetStatus::WarmUp(n) if n <= 1 => GensetStatus::On(0),
            GensetStatus::WarmUp(n) => GensetStatus::WarmUp(n - 1),
            GensetStatus::On(n) => GensetStatus::On(n.saturating_add(1)),
            GensetStatus::CoolDown(n) if n <= 1 => GensetStatus::Off,
            GensetStatus::CoolDown(n) => GensetStatus::CoolDown(n - 1),
        }
    }

    /// Forced output of a routine or idle status, `None` while on.
    pub fn routine_power(self, params: &GensetParams) -> Option<f64> {
        match self {
            GensetStatus::On(_) => None,
            GensetStatus::WarmUp(_) => Some(params.warmup_power_kw),
            GensetStatus::Off | GensetStatus::CoolDown(_) => Some(0.0),
        }
    }
}

/// Phase label for one elapsed minute, e.g. `WarmUp:2` (second warm-up
/// minute) or `On:31` (31st minute on). Used in trajectory logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseLabel {
    pub kind: PhaseKind,
    /// 1-based minute within the phase, 0 for `Off`.
    pub minute: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseKind {
    Off,
    WarmUp,
    On,
    CoolDown,
}

impl PhaseLabel {
    pub const OFF: PhaseLabel = PhaseLabel { kind: PhaseKind::Off, minute: 0 };

    fn of(status: GensetStatus, params: &GensetParams) -> Self {
        match status {
            GensetStatus::Off => Self::OFF,
            GensetStatus::WarmUp(r) => PhaseLabel {
                kind: PhaseKind::WarmUp,
                minute: params.warmup_minutes.saturating_sub(r) + 1,
            },
            GensetStatus::On(run) => PhaseLabel { kind: PhaseKind::On, minute: run + 1 },
            GensetStatus::CoolDown(r) => PhaseLabel {
                kind: PhaseKind::CoolDown,
                minute: params.cooldown_minutes.saturating_sub(r) + 1,
            },
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PhaseKind::Off => f.write_str("Off"),
            PhaseKind::WarmUp => write!(f, "WarmUp:{}", self.minute),
            PhaseKind::On => write!(f, "On:{}", self.minute),
            PhaseKind::CoolDown => write!(f, "CoolDown:{}", self.minute),
        }
    }
}

/// Power samples of the last operating minutes (status other than `Off`).
///
/// Backed by a persistent vector so that the many digital-twin copies of a
/// genset share storage.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerHistory {
    samples: Vector<f64>,
    capacity: usize,
    sum: f64,
    /// Sum of `max(sample, p_min)` over stored samples.
    floored_sum: f64,
}

impl PowerHistory {
    pub fn new(capacity: usize) -> Self {
        Self {
            samples: Vector::new(),
            capacity,
            sum: 0.0,
            floored_sum: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() >= self.capacity
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    pub fn oldest(&self) -> Option<f64> {
        self.samples.front().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.samples.iter()
    }

    pub fn average(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.sum / self.len() as f64)
    }

    /// Appends one operating-minute sample, evicting the oldest when full.
    pub fn push(&mut self, sample: f64, p_min: f64) {
        if self.is_full() {
            if let Some(old) = self.samples.pop_front() {
                self.sum -= old;
                self.floored_sum -= old.max(p_min);
            }
        }
        self.samples.push_back(sample);
        self.sum += sample;
        self.floored_sum += sample.max(p_min);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GensetState {
    pub params: GensetParams,
    pub status: GensetStatus,
    /// Power delivered last minute (kW).
    pub p_out: f64,
    pub history: PowerHistory,
    /// Fuel burnt last minute (litres).
    pub last_fuel: f64,
    /// Phase of the last elapsed minute.
    pub last_phase: PhaseLabel,
    /// Whether the last minute used overload authorization.
    pub last_overload: bool,
}

impl GensetState {
    pub fn new(params: GensetParams, status: GensetStatus) -> Self {
        Self {
            history: PowerHistory::new(params.avg_window_minutes),
            params,
            status,
            p_out: 0.0,
            last_fuel: 0.0,
            last_phase: PhaseLabel::OFF,
            last_overload: false,
        }
    }

    /// Highest output allowed next minute by the rolling-average cap.
    ///
    /// Two bounds are combined. The first keeps the average of the window,
    /// including the new sample, at or below the cap. The second keeps the
    /// minimum power feasible for every later minute: counting empty slots
    /// and sub-minimum samples at `p_min`, the window sum must stay within the
    /// cap budget, so whatever gets evicted later there is always room for a
    /// `p_min` sample. The second bound never binds before the window has
    /// filled with heavy operation.
    pub fn power_cap_48h(&self) -> f64 {
        let p = &self.params;
        let cap = p.avg_cap_kw();
        let window = p.avg_window_minutes as f64;
        let h = &self.history;
        let n = h.len() as f64;
        let (average_bound, evicted_floor) = if h.is_full() {
            let oldest = h.oldest().unwrap_or(0.0);
            (cap * window - (h.sum() - oldest), oldest.max(p.p_min_kw))
        } else {
            (cap * (n + 1.0) - h.sum(), p.p_min_kw)
        };
        let empty_slots = (window - n).max(0.0);
        let budget = h.floored_sum + p.p_min_kw * empty_slots;
        let feasibility_bound = cap * window - budget + evicted_floor;
        average_bound.min(feasibility_bound).clamp(0.0, p.p_max_kw)
    }

    /// Upper bound on the setpoint while on: nominal power (or the overload
    /// maximum when authorized) and the rolling-average cap.
    pub fn available_cap(&self, overload: bool) -> f64 {
        let limit = if overload { self.params.p_max_kw } else { self.params.p_nominal_kw };
        limit.min(self.power_cap_48h())
    }

    /// Whether a stop command is acceptable now.
    pub fn can_stop(&self, enforce: bool) -> bool {
        match self.status {
            GensetStatus::On(run) => !enforce || run >= self.params.min_runtime_minutes,
            _ => false,
        }
    }

    pub fn can_start(&self) -> bool {
        self.status.is_off()
    }
}

/// Corrects the status command (start only from off, stop only after the
/// minimum runtime) and clips the setpoint to `[p_min, cap]` while on.
/// Routine minutes get their forced power. With `enforce` off only the
/// physical routines and the absolute maximum remain.
pub fn genset_shield(state: &GensetState, action: GensetAction, enforce: bool) -> GensetAction {
    let delta = match action.delta {
        StatusCommand::Start if state.can_start() => StatusCommand::Start,
        StatusCommand::Stop if state.can_stop(enforce) => StatusCommand::Stop,
        _ => StatusCommand::DoNothing,
    };
    let status = state.status.with_command(delta, &state.params);
    let p = if action.p_setpoint.is_finite() { action.p_setpoint } else { 0.0 };
    let p_setpoint = match status.routine_power(&state.params) {
        Some(forced) => forced,
        None if enforce => {
            let cap = state.available_cap(action.overload);
            p.clamp(state.params.p_min_kw.min(cap), cap)
        }
        None => p.clamp(0.0, state.params.p_max_kw),
    };
    GensetAction { delta, p_setpoint, overload: action.overload }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GensetStepOutput {
    pub p_out: f64,
    pub fuel_l: f64,
}

/// Advances the genset one minute under an already shielded action.
pub fn genset_step(state: &mut GensetState, action: GensetAction) -> Result<GensetStepOutput> {
    let params = state.params;
    let status = state.status.with_command(action.delta, &params);
    let p_out = status.routine_power(&params).unwrap_or(action.p_setpoint);
    if !p_out.is_finite() || p_out < 0.0 || p_out > params.p_max_kw + 1e-9 {
        return Err(Error::InvariantFailure(format!(
            "genset output {p_out} kW outside [0, {}]",
            params.p_max_kw
        )));
    }
    let running = !status.is_off();
    let fuel_l = p_out * params.fuel_l_per_kwh / MINUTES_PER_HOUR
        + if running { params.fuel_idle_l_per_h / MINUTES_PER_HOUR } else { 0.0 };
    if running {
        state.history.push(p_out, params.p_min_kw);
    }
    state.last_phase = PhaseLabel::of(status, &params);
    state.last_overload = action.overload && p_out > params.p_nominal_kw;
    state.status = status.advanced();
    state.p_out = p_out;
    state.last_fuel = fuel_l;
    Ok(GensetStepOutput { p_out, fuel_l })
}
