//! Baseline controllers emitting microgrid actions.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::EnvObservation;
use crate::error::Error;
use crate::scu::{MicrogridAction, StatusCommand};

/// Battery setpoint magnitude used by the baselines (kW).
pub const BATTERY_NOMINAL_KW: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Random,
    BatteryGreedy,
    FuelGreedy,
    Greedy,
    Heuristic,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Random,
        PolicyKind::BatteryGreedy,
        PolicyKind::FuelGreedy,
        PolicyKind::Greedy,
        PolicyKind::Heuristic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::BatteryGreedy => "battery-greedy",
            PolicyKind::FuelGreedy => "fuel-greedy",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Heuristic => "heuristic",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?}")))
    }
}

/// Uniform status command and battery setpoint.
pub fn random_policy(rng: &mut impl Rng) -> MicrogridAction {
    let delta_orch = StatusCommand::ALL[rng.random_range(0..3)];
    let p_batt_setpoint = rng.random_range(-BATTERY_NOMINAL_KW..=BATTERY_NOMINAL_KW);
    MicrogridAction { delta_orch, p_batt_setpoint }
}

/// Keeps the battery idle and leaves genset commitment to the shields.
pub fn battery_greedy_policy() -> MicrogridAction {
    MicrogridAction { delta_orch: StatusCommand::DoNothing, p_batt_setpoint: 0.0 }
}

/// Tries to stop gensets; charges on wind excess, discharges otherwise
/// (ties discharge).
pub fn fuel_greedy_policy(demand: f64, wind_avail: f64) -> MicrogridAction {
    let p = if wind_avail > demand { -BATTERY_NOMINAL_KW } else { BATTERY_NOMINAL_KW };
    MicrogridAction { delta_orch: StatusCommand::Stop, p_batt_setpoint: p }
}

/// Tries to stop gensets and discharges flat out.
pub fn greedy_policy() -> MicrogridAction {
    MicrogridAction { delta_orch: StatusCommand::Stop, p_batt_setpoint: BATTERY_NOMINAL_KW }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BatteryMode {
    Charging,
    Discharging,
}

/// Thresholds of the industry heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicParams {
    /// Start the next genset above this load fraction...
    pub start_fraction: f64,
    /// ...held for this many consecutive minutes.
    pub start_minutes: u32,
    /// Stop the last genset when this fraction of the other genset's
    /// available power covers the load...
    pub stop_fraction: f64,
    /// ...for this many consecutive minutes.
    pub stop_minutes: u32,
    pub soc_high: f64,
    pub soc_low: f64,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self {
            start_fraction: 0.9,
            start_minutes: 5,
            stop_fraction: 0.7,
            stop_minutes: 5,
            soc_high: 0.90,
            soc_low: 0.10,
        }
    }
}

/// Industry heuristic: always one genset on, a second one started under
/// sustained high load and stopped when the first could carry the load
/// comfortably; the battery alternates between charging on wind excess and
/// discharging flat out.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicState {
    pub params: HeuristicParams,
    pub battery_mode: BatteryMode,
    pub over_counter: u32,
    pub under_counter: u32,
}

impl HeuristicState {
    pub fn new(params: HeuristicParams) -> Self {
        Self { params, battery_mode: BatteryMode::Charging, over_counter: 0, under_counter: 0 }
    }

    pub fn act(&mut self, obs: &EnvObservation) -> MicrogridAction {
        const TOL: f64 = 1e-9;
        let p = self.params;
        match self.battery_mode {
            BatteryMode::Charging if obs.soc >= p.soc_high - TOL => self.battery_mode = BatteryMode::Discharging,
            BatteryMode::Discharging if obs.soc <= p.soc_low + TOL => self.battery_mode = BatteryMode::Charging,
            _ => {}
        }

        let committed: Vec<_> = obs.gensets.iter().filter(|g| g.status.is_committed()).collect();
        let genset_power: f64 = obs.gensets.iter().map(|g| g.p_out).sum();
        // In charging mode any discharge was forced by a shortage the gensets
        // could not cover, so it counts as genset load.
        let load = match self.battery_mode {
            BatteryMode::Charging => genset_power + obs.p_batt.max(0.0),
            BatteryMode::Discharging => genset_power,
        };

        let mut delta = StatusCommand::DoNothing;
        match committed.as_slice() {
            [] => {
                self.over_counter = 0;
                self.under_counter = 0;
                delta = StatusCommand::Start;
            }
            [lead] => {
                self.under_counter = 0;
                let ratio = load / lead.available_kw.max(TOL);
                self.over_counter = if ratio > p.start_fraction { self.over_counter + 1 } else { 0 };
                if ratio > 1.0 || self.over_counter >= p.start_minutes {
                    delta = StatusCommand::Start;
                }
            }
            [lead, ..] => {
                self.over_counter = 0;
                let fits = load <= p.stop_fraction * lead.available_kw + TOL;
                self.under_counter = if fits { self.under_counter + 1 } else { 0 };
                if self.under_counter >= p.stop_minutes {
                    delta = StatusCommand::Stop;
                }
            }
        }
        if delta == StatusCommand::Start && committed.len() == obs.gensets.len() {
            delta = StatusCommand::DoNothing;
        }

        let p_batt_setpoint = match self.battery_mode {
            BatteryMode::Charging => -(obs.wind_avail - obs.demand).clamp(0.0, BATTERY_NOMINAL_KW),
            BatteryMode::Discharging => BATTERY_NOMINAL_KW,
        };
        MicrogridAction { delta_orch: delta, p_batt_setpoint }
    }
}

/// A baseline with its per-episode state.
#[derive(Debug, Clone)]
pub enum Policy {
    Random(Box<ChaCha8Rng>),
    BatteryGreedy,
    FuelGreedy,
    Greedy,
    Heuristic(HeuristicState),
}

impl Policy {
    pub fn new(kind: PolicyKind, seed: u64, heuristic: HeuristicParams) -> Self {
        match kind {
            PolicyKind::Random => Policy::Random(Box::new(ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_d0fa_11ce))),
            PolicyKind::BatteryGreedy => Policy::BatteryGreedy,
            PolicyKind::FuelGreedy => Policy::FuelGreedy,
            PolicyKind::Greedy => Policy::Greedy,
            PolicyKind::Heuristic => Policy::Heuristic(HeuristicState::new(heuristic)),
        }
    }

    pub fn act(&mut self, obs: &EnvObservation) -> MicrogridAction {
        match self {
            Policy::Random(rng) => random_policy(rng.as_mut()),
            Policy::BatteryGreedy => battery_greedy_policy(),
            Policy::FuelGreedy => fuel_greedy_policy(obs.demand, obs.wind_avail),
            Policy::Greedy => greedy_policy(),
            Policy::Heuristic(state) => state.act(obs),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::GensetStatus;
    use crate::env::GensetObs;

    fn obs(soc: f64, gensets: Vec<GensetObs>) -> EnvObservation {
        EnvObservation {
            minute: 0,
            minute_of_day: 0,
            demand: 320.0,
            wind_avail: 0.0,
            soc,
            p_batt: 0.0,
            p_wind: 0.0,
            gensets,
            demand_forecast: [0.0; 30],
            wind_forecast: [0.0; 30],
            rainflow: vec![],
            rainflow_capacity: 102,
        }
    }

    fn on(p: f64) -> GensetObs {
        GensetObs { status: GensetStatus::On(40), p_out: p, available_kw: 400.0, avg_kw: 0.0 }
    }

    fn off() -> GensetObs {
        GensetObs { status: GensetStatus::Off, p_out: 0.0, available_kw: 400.0, avg_kw: 0.0 }
    }

    #[test]
    fn random_is_reproducible_and_uniform() {
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<_> = (0..100).map(|_| random_policy(&mut a)).collect();
        let ys: Vec<_> = (0..100).map(|_| random_policy(&mut b)).collect();
        assert_eq!(xs, ys);
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            let a = random_policy(&mut a);
            assert!(a.p_batt_setpoint.abs() <= 600.0);
            counts[a.delta_orch.index() as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 1.0 / 3.0).abs() <= 0.02, "{counts:?}");
        }
    }

    #[test]
    fn fixed_baselines() {
        assert_eq!(battery_greedy_policy(), MicrogridAction { delta_orch: StatusCommand::DoNothing, p_batt_setpoint: 0.0 });
        assert_eq!(greedy_policy(), MicrogridAction { delta_orch: StatusCommand::Stop, p_batt_setpoint: 600.0 });
        assert_eq!(fuel_greedy_policy(250.0, 300.0).p_batt_setpoint, -600.0);
        assert_eq!(fuel_greedy_policy(320.0, 200.0).p_batt_setpoint, 600.0);
        assert_eq!(fuel_greedy_policy(300.0, 300.0), MicrogridAction { delta_orch: StatusCommand::Stop, p_batt_setpoint: 600.0 });
    }

    #[test]
    fn heuristic_starts_after_five_minutes_above_ninety_percent() {
        let mut h = HeuristicState::new(HeuristicParams::default());
        for minute in 1..=5 {
            let a = h.act(&obs(0.5, vec![on(365.0), off()]));
            let expected = if minute == 5 { StatusCommand::Start } else { StatusCommand::DoNothing };
            assert_eq!(a.delta_orch, expected, "minute {minute}");
        }
    }

    #[test]
    fn heuristic_starts_immediately_above_capacity() {
        let mut h = HeuristicState::new(HeuristicParams::default());
        assert_eq!(h.act(&obs(0.5, vec![on(405.0), off()])).delta_orch, StatusCommand::Start);
    }

    #[test]
    fn heuristic_counter_resets() {
        let mut h = HeuristicState::new(HeuristicParams::default());
        for _ in 0..4 {
            h.act(&obs(0.5, vec![on(365.0), off()]));
        }
        h.act(&obs(0.5, vec![on(300.0), off()]));
        assert_eq!(h.act(&obs(0.5, vec![on(365.0), off()])).delta_orch, StatusCommand::DoNothing);
    }

    #[test]
    fn heuristic_keeps_one_genset() {
        let mut h = HeuristicState::new(HeuristicParams::default());
        for _ in 0..20 {
            assert_ne!(h.act(&obs(0.5, vec![on(120.0), off()])).delta_orch, StatusCommand::Stop);
        }
        assert_eq!(h.act(&obs(0.5, vec![off(), off()])).delta_orch, StatusCommand::Start);
    }

    #[test]
    fn heuristic_stops_second_genset_under_light_load() {
        let mut h = HeuristicState::new(HeuristicParams::default());
        let light = || obs(0.5, vec![on(130.0), on(130.0)]);
        for _ in 0..4 {
            assert_eq!(h.act(&light()).delta_orch, StatusCommand::DoNothing);
        }
        assert_eq!(h.act(&light()).delta_orch, StatusCommand::Stop);
    }

    #[test]
    fn heuristic_battery_modes() {
        let mut h = HeuristicState::new(HeuristicParams::default());
        let mut o = obs(0.5, vec![on(200.0), off()]);
        o.wind_avail = 400.0;
        assert_eq!(h.act(&o).p_batt_setpoint, -80.0);
        o.wind_avail = 100.0;
        assert_eq!(h.act(&o).p_batt_setpoint, 0.0);
        o.soc = 0.90;
        assert_eq!(h.act(&o).p_batt_setpoint, 600.0);
        assert_eq!(h.battery_mode, BatteryMode::Discharging);
        o.soc = 0.5;
        assert_eq!(h.act(&o).p_batt_setpoint, 600.0);
        o.soc = 0.10;
        assert_eq!(h.act(&o).p_batt_setpoint, 0.0);
        assert_eq!(h.battery_mode, BatteryMode::Charging);
    }
}
