//! Leaf subsystems: wind turbine, battery and gensets.

pub mod battery;
pub mod genset;
pub mod wind;

pub use battery::{battery_shield, battery_step, BatteryParams, BatteryState, BatteryStepOutput};
pub use genset::{
    genset_shield, genset_step, GensetParams, GensetState, GensetStatus, GensetStepOutput, PhaseKind, PhaseLabel,
    PowerHistory,
};
pub use wind::{wind_shield_and_step, WindTurbineState};

use crate::error::{contract, Result};
use crate::scu::{ActionBundle, Exogenous};

/// Physical state of one device.
#[derive(Debug, Clone, PartialEq)]
pub enum DeviceState {
    Wind(WindTurbineState),
    Battery(BatteryState),
    Genset(GensetState),
}

impl DeviceState {
    pub fn kind(&self) -> &'static str {
        match self {
            DeviceState::Wind(_) => "wind",
            DeviceState::Battery(_) => "battery",
            DeviceState::Genset(_) => "genset",
        }
    }

    /// Power delivered during the last minute (kW).
    pub fn p_out(&self) -> f64 {
        match self {
            DeviceState::Wind(s) => s.p_out,
            DeviceState::Battery(s) => s.p_out,
            DeviceState::Genset(s) => s.p_out,
        }
    }

    pub fn as_battery(&self) -> Option<&BatteryState> {
        match self {
            DeviceState::Battery(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_genset(&self) -> Option<&GensetState> {
        match self {
            DeviceState::Genset(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_wind(&self) -> Option<&WindTurbineState> {
        match self {
            DeviceState::Wind(s) => Some(s),
            _ => None,
        }
    }

    /// Advances the device one minute under a compliant action.
    pub fn step(&mut self, action: &ActionBundle, exo: &Exogenous) -> Result<()> {
        match (self, action) {
            (DeviceState::Wind(s), ActionBundle::Wind(a)) => {
                wind_shield_and_step(s, *a, exo.wind_avail);
            }
            (DeviceState::Battery(s), ActionBundle::Battery(a)) => {
                battery_step(s, *a)?;
            }
            (DeviceState::Genset(s), ActionBundle::Genset(a)) => {
                genset_step(s, *a)?;
            }
            (dev, action) => {
                return Err(contract(format!(
                    "{} device cannot take a {} action",
                    dev.kind(),
                    action.level()
                )))
            }
        }
        Ok(())
    }
}
