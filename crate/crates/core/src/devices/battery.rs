use serde::{Deserialize, Serialize};

use crate::degradation::{
    cycle_step_cost, linear_step_cost, DegradationModel, DegradationParams, SwitchingBuffer,
};
use crate::error::{Error, Result};
use crate::scu::BatteryAction;

/// Minutes per hour; the simulation advances one minute per step.
const MINUTES_PER_HOUR: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryParams {
    pub capacity_kwh: f64,
    pub nominal_power_kw: f64,
    /// One-way (charge or discharge) efficiency.
    pub efficiency: f64,
    pub soc_min: f64,
    /// Emergency floor, usable only with reserve authorization.
    pub soc_reserve: f64,
    pub soc_max: f64,
    pub degradation: DegradationParams,
    pub model: DegradationModel,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            capacity_kwh: 672.0,
            nominal_power_kw: 600.0,
            efficiency: 0.95,
            soc_min: 0.10,
            soc_reserve: 0.05,
            soc_max: 0.90,
            degradation: DegradationParams::default(),
            model: DegradationModel::Cycle,
        }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<()> {
        self.degradation.validate()?;
        let ok = self.capacity_kwh > 0.0
            && self.nominal_power_kw > 0.0
            && self.efficiency > 0.0
            && self.efficiency <= 1.0
            && 0.0 <= self.soc_reserve
            && self.soc_reserve <= self.soc_min
            && self.soc_min < self.soc_max
            && self.soc_max <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("inconsistent battery parameters: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub params: BatteryParams,
    /// State of charge as a fraction of capacity.
    pub soc: f64,
    /// Power delivered last minute (kW, positive = discharge).
    pub p_out: f64,
    pub rainflow: SwitchingBuffer,
    /// Degradation charged for the last minute.
    pub last_degradation: f64,
}

impl BatteryState {
    pub fn new(params: BatteryParams, soc: f64) -> Self {
        Self {
            rainflow: SwitchingBuffer::new(soc, params.degradation.window),
            params,
            soc,
            p_out: 0.0,
            last_degradation: 0.0,
        }
    }

    /// Feasible power band `(max charge as a negative number, max discharge)`
    /// for the next minute. With `enforce` off only the physical limits
    /// (empty/full cell, nominal power) apply.
    pub fn power_limits(&self, allow_reserve: bool, enforce: bool) -> (f64, f64) {
        let p = &self.params;
        let (floor, ceiling) = match (enforce, allow_reserve) {
            (false, _) => (0.0, 1.0),
            (true, true) => (p.soc_reserve, p.soc_max),
            (true, false) => (p.soc_min, p.soc_max),
        };
        let discharge = ((self.soc - floor) * p.capacity_kwh * p.efficiency * MINUTES_PER_HOUR)
            .clamp(0.0, p.nominal_power_kw);
        let charge = ((ceiling - self.soc) * p.capacity_kwh / p.efficiency * MINUTES_PER_HOUR)
            .clamp(0.0, p.nominal_power_kw);
        (-charge, discharge)
    }

    /// SoC after delivering `p_kw` for one minute.
    pub fn soc_after(&self, p_kw: f64) -> f64 {
        let p = &self.params;
        let energy = p_kw / MINUTES_PER_HOUR;
        if p_kw > 0.0 {
            self.soc - energy / (p.efficiency * p.capacity_kwh)
        } else {
            self.soc - energy * p.efficiency / p.capacity_kwh
        }
    }
}

/// Clips the setpoint to the nominal power and to the SoC-feasible band.
pub fn battery_shield(state: &BatteryState, action: BatteryAction, enforce: bool) -> BatteryAction {
    let (lo, hi) = state.power_limits(action.allow_reserve, enforce);
    let p = if action.p_setpoint.is_finite() { action.p_setpoint } else { 0.0 };
    BatteryAction {
        p_setpoint: p.clamp(lo, hi),
        allow_reserve: action.allow_reserve,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryStepOutput {
    pub p_out: f64,
    pub degradation: f64,
}

/// Applies an already shielded action for one minute: updates the SoC, the
/// rainflow buffer and the degradation charged for the minute.
pub fn battery_step(state: &mut BatteryState, action: BatteryAction) -> Result<BatteryStepOutput> {
    let p_out = action.p_setpoint;
    let soc_before = state.soc;
    let soc_after = state.soc_after(p_out);
    if !(-1e-9..=1.0 + 1e-9).contains(&soc_after) || !soc_after.is_finite() {
        return Err(Error::InvariantFailure(format!(
            "battery SoC would leave [0, 1]: {soc_before} -> {soc_after} at {p_out} kW"
        )));
    }
    state.soc = soc_after;
    state.p_out = p_out;
    state.rainflow.update(soc_after);
    let delta = soc_after - soc_before;
    let degradation = match state.params.model {
        DegradationModel::Cycle => {
            cycle_step_cost(soc_before, delta, state.rainflow.last(), &state.params.degradation)
        }
        DegradationModel::Linear => linear_step_cost(delta, state.params.degradation.alpha_d),
    };
    state.last_degradation = degradation;
    Ok(BatteryStepOutput { p_out, degradation })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn battery(soc: f64) -> BatteryState {
        BatteryState::new(BatteryParams::default(), soc)
    }

    fn shield(soc: f64, p: f64, reserve: bool) -> f64 {
        battery_shield(&battery(soc), BatteryAction { p_setpoint: p, allow_reserve: reserve }, true).p_setpoint
    }

    #[test]
    fn discharge_limit_near_floor() {
        let expected = 0.01 * 672.0 * 0.95 * 60.0;
        assert!((shield(0.11, 600.0, false) - expected).abs() < 1e-9);
        assert!((expected - 383.04).abs() < 1e-9);
    }

    #[test]
    fn charge_limit_near_ceiling() {
        let expected = -(0.01 * 672.0 / 0.95 * 60.0);
        assert!((shield(0.89, -600.0, false) - expected).abs() < 1e-9);
    }

    #[test]
    fn idle_is_compliant() {
        assert_eq!(shield(0.5, 0.0, false), 0.0);
    }

    #[test]
    fn nominal_power_bounds() {
        assert_eq!(shield(0.5, 900.0, false), 600.0);
        assert_eq!(shield(0.5, -900.0, false), -600.0);
    }

    #[test]
    fn reserve_extends_discharge_only() {
        assert_eq!(shield(0.10, 300.0, false), 0.0);
        assert_eq!(shield(0.10, 600.0, true), 600.0);
        assert!((shield(0.06, 600.0, true) - 383.04).abs() < 1e-9);
        // below the normal floor without reserve: no discharge, charging allowed
        assert_eq!(shield(0.07, 100.0, false), 0.0);
        assert_eq!(shield(0.07, -100.0, false), -100.0);
    }

    #[test]
    fn discharge_step_lowers_soc_by_one_percent() {
        let mut b = battery(0.5);
        let out = battery_step(&mut b, BatteryAction { p_setpoint: 383.04, allow_reserve: false }).unwrap();
        assert!((b.soc - 0.49).abs() < 1e-12);
        assert_eq!(out.p_out, 383.04);
        assert!(out.degradation > 0.0);
    }

    #[test]
    fn charge_step_raises_soc_by_one_percent() {
        let mut b = battery(0.5);
        let p = -(0.01 * 672.0 / 0.95 * 60.0);
        battery_step(&mut b, BatteryAction { p_setpoint: p, allow_reserve: false }).unwrap();
        assert!((b.soc - 0.51).abs() < 1e-12);
    }

    #[test]
    fn idle_step_is_free() {
        let mut b = battery(0.5);
        let out = battery_step(&mut b, BatteryAction::default()).unwrap();
        assert_eq!(b.soc, 0.5);
        assert_eq!(out.degradation, 0.0);
    }

    #[test]
    fn round_trip_loses_efficiency_squared() {
        let mut b = battery(0.5);
        let charge_kw = -300.0;
        battery_step(&mut b, BatteryAction { p_setpoint: charge_kw, allow_reserve: false }).unwrap();
        let gained = b.soc - 0.5;
        // discharge power that removes exactly the gained SoC
        let p = gained * 0.95 * 672.0 * 60.0;
        battery_step(&mut b, BatteryAction { p_setpoint: p, allow_reserve: false }).unwrap();
        assert!((b.soc - 0.5).abs() < 1e-12);
        assert!((p / -charge_kw - 0.95 * 0.95).abs() < 1e-12);
    }

    #[test]
    fn unshielded_overdischarge_is_an_invariant_failure() {
        let mut b = battery(0.001);
        let err = battery_step(&mut b, BatteryAction { p_setpoint: 600.0, allow_reserve: true }).unwrap_err();
        assert!(matches!(err, Error::InvariantFailure(_)));
    }

    #[test]
    fn linear_model() {
        let params = BatteryParams { model: DegradationModel::Linear, ..Default::default() };
        let mut b = BatteryState::new(params, 0.5);
        let out = battery_step(&mut b, BatteryAction { p_setpoint: 383.04, allow_reserve: false }).unwrap();
        assert!((out.degradation - 5.0 * 0.01).abs() < 1e-12);
    }
}
