use serde::{Deserialize, Serialize};

use crate::scu::WindAction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindTurbineState {
    /// Available wind power this minute (kW).
    pub p_avail: f64,
    /// Delivered power (kW).
    pub p_out: f64,
    /// Turbine rating; available power never exceeds it.
    pub rated_kw: f64,
}

impl WindTurbineState {
    pub fn new(rated_kw: f64) -> Self {
        Self {
            p_avail: 0.0,
            p_out: 0.0,
            rated_kw,
        }
    }
}

/// The turbine carries no operational constraint, so its shield relays the
/// setpoint unchanged; delivered power is the setpoint clipped to
/// `[0, p_avail]`.
pub fn wind_shield_and_step(state: &mut WindTurbineState, action: WindAction, p_avail: f64) -> f64 {
    state.p_avail = p_avail.clamp(0.0, state.rated_kw);
    state.p_out = action.p_setpoint.clamp(0.0, state.p_avail);
    state.p_out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(setpoint: f64, avail: f64) -> f64 {
        let mut s = WindTurbineState::new(400.0);
        wind_shield_and_step(&mut s, WindAction { p_setpoint: setpoint }, avail)
    }

    #[test]
    fn clips_to_available_power() {
        assert_eq!(run(300.0, 272.0), 272.0);
        assert_eq!(run(-50.0, 272.0), 0.0);
        assert_eq!(run(0.0, 272.0), 0.0);
        assert_eq!(run(200.0, 272.0), 200.0);
    }
}
