use std::fmt;

use serde::{Deserialize, Serialize};

/// Status change requested for a genset or for the genset orchestrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum StatusCommand {
    Start,
    Stop,
    #[default]
    DoNothing,
}

impl StatusCommand {
    pub const ALL: [StatusCommand; 3] = [StatusCommand::DoNothing, StatusCommand::Start, StatusCommand::Stop];

    /// Discrete action index used by the agent interface:
    /// 0 = do nothing, 1 = start, 2 = stop.
    pub fn index(self) -> u8 {
        match self {
            StatusCommand::DoNothing => 0,
            StatusCommand::Start => 1,
            StatusCommand::Stop => 2,
        }
    }

    pub fn from_index(i: i64) -> Option<Self> {
        match i {
            0 => Some(StatusCommand::DoNothing),
            1 => Some(StatusCommand::Start),
            2 => Some(StatusCommand::Stop),
            _ => None,
        }
    }
}

impl fmt::Display for StatusCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StatusCommand::Start => "Start",
            StatusCommand::Stop => "Stop",
            StatusCommand::DoNothing => "DoNothing",
        })
    }
}

/// Agent-level action on the microgrid: one status change for the genset
/// group and a battery power setpoint (kW, positive = discharge).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MicrogridAction {
    pub delta_orch: StatusCommand,
    pub p_batt_setpoint: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OrchestratorAction {
    pub delta: StatusCommand,
    pub p_setpoint: f64,
    /// Emergency authorization to use the genset overload band.
    pub overload: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GensetAction {
    pub delta: StatusCommand,
    pub p_setpoint: f64,
    pub overload: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatteryAction {
    pub p_setpoint: f64,
    /// Emergency authorization to discharge into the SoC reserve.
    pub allow_reserve: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindAction {
    pub p_setpoint: f64,
}

/// Action addressed to one level of the SCU tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionBundle {
    Microgrid(MicrogridAction),
    Orchestrator(OrchestratorAction),
    Genset(GensetAction),
    Battery(BatteryAction),
    Wind(WindAction),
}

impl ActionBundle {
    pub fn level(&self) -> &'static str {
        match self {
            ActionBundle::Microgrid(_) => "microgrid",
            ActionBundle::Orchestrator(_) => "orchestrator",
            ActionBundle::Genset(_) => "genset",
            ActionBundle::Battery(_) => "battery",
            ActionBundle::Wind(_) => "wind",
        }
    }

    /// All setpoints are finite.
    pub fn is_well_formed(&self) -> bool {
        match self {
            ActionBundle::Microgrid(a) => a.p_batt_setpoint.is_finite(),
            ActionBundle::Orchestrator(a) => a.p_setpoint.is_finite(),
            ActionBundle::Genset(a) => a.p_setpoint.is_finite(),
            ActionBundle::Battery(a) => a.p_setpoint.is_finite(),
            ActionBundle::Wind(a) => a.p_setpoint.is_finite(),
        }
    }
}

/// Exogenous inputs for one minute.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Exogenous {
    /// Demand (kW).
    pub demand: f64,
    /// Available wind power (kW).
    pub wind_avail: f64,
}
