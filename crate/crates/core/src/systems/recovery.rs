//! Predictive recovery shield over the orchestrator status command.
//!
//! A candidate command is kept only if, followed by `Start` on every later
//! minute of the horizon, the microgrid twin never runs short of power in two
//! rollouts: a worst case where demand climbs and wind falls at their fastest
//! observed rates while the battery discharges flat out with reserves
//! allowed, and a steady case with constant inputs and no reserves.
//!
//! Among the commands that pass, the first one that also avoids a surplus is
//! preferred: followed by `DoNothing`, the twin must not be forced above
//! demand while the battery charges flat out and demand falls at its fastest
//! rate, for as long as a started genset cannot be stopped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scu::{ActionBundle, ControllerState, Exogenous, MicrogridAction, ScuNode, Shield, StatusCommand};

use super::microgrid::{MicrogridShieldConfig, BALANCE_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryScenario {
    /// Rollout length in minutes, the current one included.
    pub horizon: usize,
    pub demand_high: f64,
    pub demand_low: f64,
    pub wind_low: f64,
    /// Fastest demand increase (kW/min).
    pub demand_ramp: f64,
    /// Fastest wind decrease (kW/min).
    pub wind_ramp: f64,
    /// Length of the surplus rollout; 0 disables the surplus preference.
    pub surplus_horizon: usize,
}

impl Default for RecoveryScenario {
    fn default() -> Self {
        Self {
            horizon: 9,
            demand_high: 540.0,
            demand_low: 180.0,
            wind_low: 0.0,
            demand_ramp: 20.0,
            wind_ramp: 40.0,
            surplus_horizon: 34,
        }
    }
}

impl RecoveryScenario {
    pub fn validate(&self) -> Result<()> {
        let ok = self.horizon >= 1
            && self.demand_ramp >= 0.0
            && self.wind_ramp >= 0.0
            && self.demand_high.is_finite()
            && self.demand_low.is_finite()
            && self.wind_low.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid recovery scenario: {self:?}")))
        }
    }

    /// Exogenous inputs of the worst-case rollout, starting from the current
    /// minute's values.
    pub fn worst_case(&self, now: &Exogenous) -> Vec<Exogenous> {
        (0..self.horizon)
            .map(|tau| {
                let t = tau as f64;
                Exogenous {
                    demand: now.demand.max((now.demand + t * self.demand_ramp).min(self.demand_high)),
                    wind_avail: now.wind_avail.min((now.wind_avail - t * self.wind_ramp).max(self.wind_low)),
                }
            })
            .collect()
    }

    pub fn steady(&self, now: &Exogenous) -> Vec<Exogenous> {
        vec![*now; self.horizon]
    }

    /// Demand falling as fast as observed; wind is curtailable and kept.
    pub fn falling(&self, now: &Exogenous) -> Vec<Exogenous> {
        (0..self.surplus_horizon)
            .map(|tau| Exogenous {
                demand: now.demand.min((now.demand - tau as f64 * self.demand_ramp).max(self.demand_low)),
                wind_avail: now.wind_avail,
            })
            .collect()
    }
}

/// Which of the two recovery rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    WorstCase,
    Steady,
}

impl Scenario {
    pub fn number(self) -> u8 {
        match self {
            Scenario::WorstCase => 1,
            Scenario::Steady => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecoveryOutcome {
    pub delta: StatusCommand,
    /// No candidate passed both rollouts.
    pub exhausted: bool,
    /// First rollout failed by the requested command, if any.
    pub failed_scenario: Option<u8>,
}

/// Replacement order: the request itself, then the least disruptive options.
pub fn candidates(requested: StatusCommand) -> Vec<StatusCommand> {
    let mut out = vec![requested];
    for c in [StatusCommand::DoNothing, StatusCommand::Start, StatusCommand::Stop] {
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// Shortage energy (kW summed over minutes) of one rollout from the twin.
/// With `stop_early` the rollout ends at the first short minute.
pub fn rollout_shortage(
    scenario: &RecoveryScenario,
    config: &MicrogridShieldConfig,
    controller: &ControllerState,
    first: MicrogridAction,
    now: &Exogenous,
    which: Scenario,
    stop_early: bool,
) -> Result<f64> {
    let shadow_shield = Shield::Microgrid(MicrogridShieldConfig {
        recovery: None,
        reserves_allowed: config.reserves_allowed && which == Scenario::WorstCase,
    });
    let (exo, p_batt) = match which {
        Scenario::WorstCase => (scenario.worst_case(now), f64::MAX),
        Scenario::Steady => (scenario.steady(now), first.p_batt_setpoint),
    };
    let mut shadow = ScuNode::shadow(shadow_shield, controller);
    let mut shortage = 0.0;
    for (tau, e) in exo.iter().enumerate() {
        let delta_orch = if tau == 0 { first.delta_orch } else { StatusCommand::Start };
        let action = ActionBundle::Microgrid(MicrogridAction { delta_orch, p_batt_setpoint: p_batt });
        let obs = shadow.step(&action, e)?;
        let balance = obs.total_output() - e.demand;
        if balance < -BALANCE_TOLERANCE {
            shortage += -balance;
            if stop_early {
                break;
            }
        }
    }
    Ok(shortage)
}

/// Surplus (kW) of the first minute forced above demand when `first` is
/// followed by `DoNothing`, with the battery charging at its limit and demand
/// falling. Zero when no such minute occurs.
pub fn rollout_surplus(
    scenario: &RecoveryScenario,
    controller: &ControllerState,
    first: StatusCommand,
    now: &Exogenous,
) -> Result<f64> {
    let shadow_shield = Shield::Microgrid(MicrogridShieldConfig { recovery: None, reserves_allowed: false });
    let mut shadow = ScuNode::shadow(shadow_shield, controller);
    for (tau, e) in scenario.falling(now).iter().enumerate() {
        let delta_orch = if tau == 0 { first } else { StatusCommand::DoNothing };
        let action = ActionBundle::Microgrid(MicrogridAction { delta_orch, p_batt_setpoint: f64::MIN });
        let obs = shadow.step(&action, e)?;
        let balance = obs.total_output() - e.demand;
        if balance > BALANCE_TOLERANCE {
            return Ok(balance);
        }
    }
    Ok(0.0)
}

/// Picks the status command actually sent to the orchestrator.
pub fn recovery_shield(
    scenario: &RecoveryScenario,
    config: &MicrogridShieldConfig,
    controller: &ControllerState,
    action: MicrogridAction,
    now: &Exogenous,
) -> Result<RecoveryOutcome> {
    let check = |delta: StatusCommand, which: Scenario, stop_early: bool| {
        let first = MicrogridAction { delta_orch: delta, ..action };
        rollout_shortage(scenario, config, controller, first, now, which, stop_early)
    };
    let mut failed_scenario = None;
    let mut passes_worst_case = None;
    let mut passes_both = None;
    for (i, delta) in candidates(action.delta_orch).into_iter().enumerate() {
        let failed = if check(delta, Scenario::WorstCase, true)? > 0.0 {
            Some(Scenario::WorstCase)
        } else if check(delta, Scenario::Steady, true)? > 0.0 {
            passes_worst_case.get_or_insert(delta);
            Some(Scenario::Steady)
        } else {
            None
        };
        match failed {
            None => {
                if scenario.surplus_horizon == 0 || rollout_surplus(scenario, controller, delta, now)? == 0.0 {
                    return Ok(RecoveryOutcome { delta, exhausted: false, failed_scenario });
                }
                passes_both.get_or_insert(delta);
            }
            Some(s) if i == 0 => failed_scenario = Some(s.number()),
            Some(_) => {}
        }
    }
    if let Some(delta) = passes_both {
        return Ok(RecoveryOutcome { delta, exhausted: false, failed_scenario });
    }
    let delta = match passes_worst_case {
        Some(d) => d,
        None => {
            let mut best = (f64::INFINITY, action.delta_orch);
            for delta in candidates(action.delta_orch) {
                let total = check(delta, Scenario::WorstCase, false)? + check(delta, Scenario::Steady, false)?;
                if total < best.0 {
                    best = (total, delta);
                }
            }
            best.1
        }
    };
    Ok(RecoveryOutcome { delta, exhausted: true, failed_scenario })
}
