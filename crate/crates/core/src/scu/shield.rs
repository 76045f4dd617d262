use crate::devices::{battery_shield, genset_shield, DeviceState};
use crate::error::{contract, Result};
use crate::systems::{microgrid, orchestrator, MicrogridShieldConfig};

use super::{ActionBundle, ControllerState, Exogenous, StatusCommand};

/// Shield dispatcher of one SCU. Device shields carry an `enforce` switch:
/// when off, only the physical limits of the device are kept (ablation runs).
#[derive(Debug, Clone, PartialEq)]
pub enum Shield {
    /// No operational constraint: the setpoint is relayed unchanged.
    Wind,
    Battery { enforce: bool },
    Genset { enforce: bool },
    /// Priority order and equal power fraction over its gensets.
    Orchestrator,
    /// Zero balance, plus the recovery shield when configured.
    Microgrid(MicrogridShieldConfig),
}

impl Shield {
    pub fn level(&self) -> &'static str {
        match self {
            Shield::Wind => "wind",
            Shield::Battery { .. } => "battery",
            Shield::Genset { .. } => "genset",
            Shield::Orchestrator => "orchestrator",
            Shield::Microgrid(_) => "microgrid",
        }
    }

    /// Device-level enforcement switch (`true` for composite shields).
    pub fn enforces(&self) -> bool {
        match self {
            Shield::Battery { enforce } | Shield::Genset { enforce } => *enforce,
            _ => true,
        }
    }

    /// Turns an incoming action into one compliant action per child (or a
    /// single device action), using the controller's twin for the current
    /// state.
    pub fn dispatch(&self, controller: &ControllerState, action: &ActionBundle, exo: &Exogenous) -> Result<Dispatch> {
        let mismatch = || contract(format!("{} shield received a {} action", self.level(), action.level()));
        match (self, action) {
            (Shield::Wind, ActionBundle::Wind(a)) => Ok(Dispatch::single(ActionBundle::Wind(*a))),
            (Shield::Battery { enforce }, ActionBundle::Battery(a)) => {
                let DeviceState::Battery(b) = controller.twin_device()? else {
                    return Err(mismatch());
                };
                let shielded = battery_shield(b, *a, *enforce);
                let mut d = Dispatch::single(ActionBundle::Battery(shielded));
                d.note.intervened = shielded != *a;
                d.note.reserve = shielded.allow_reserve;
                Ok(d)
            }
            (Shield::Genset { enforce }, ActionBundle::Genset(a)) => {
                let DeviceState::Genset(g) = controller.twin_device()? else {
                    return Err(mismatch());
                };
                let shielded = genset_shield(g, *a, *enforce);
                let mut d = Dispatch::single(ActionBundle::Genset(shielded));
                d.note.requested_delta = a.delta;
                d.note.applied_delta = shielded.delta;
                d.note.intervened = shielded != *a;
                d.note.overload = shielded.overload;
                Ok(d)
            }
            (Shield::Orchestrator, ActionBundle::Orchestrator(a)) => {
                orchestrator::dispatch(controller.twin_children()?, *a)
            }
            (Shield::Microgrid(config), ActionBundle::Microgrid(a)) => microgrid::dispatch(config, controller, *a, exo),
            _ => Err(mismatch()),
        }
    }
}

/// What a shield did during one dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DispatchNote {
    pub requested_delta: StatusCommand,
    pub applied_delta: StatusCommand,
    /// Any part of the action was modified.
    pub intervened: bool,
    /// The recovery shield replaced the requested status command.
    pub recovery_replaced: bool,
    /// No candidate passed both recovery scenarios; the least bad was used.
    pub recovery_exhausted: bool,
    /// First recovery scenario (1 or 2) failed by the requested command.
    pub failed_scenario: Option<u8>,
    /// Battery reserve authorized.
    pub reserve: bool,
    /// Genset overload authorized.
    pub overload: bool,
    /// Generation minus demand planned by the dispatch (kW).
    pub planned_balance: f64,
}

/// Child actions produced by a shield, in child order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    pub actions: Vec<ActionBundle>,
    pub note: DispatchNote,
}

impl Dispatch {
    pub fn single(action: ActionBundle) -> Self {
        Self {
            actions: vec![action],
            note: DispatchNote::default(),
        }
    }
}
