//! Microgrid shield: keeps generation equal to demand while honouring the
//! agent's battery setpoint first and using wind before fuel.

use serde::{Deserialize, Serialize};

use crate::devices::{battery_shield, BatteryState, WindTurbineState};
use crate::error::{contract, Result};
use crate::scu::{
    ActionBundle, BatteryAction, ControllerState, Dispatch, DispatchNote, Exogenous, MicrogridAction,
    OrchestratorAction, ScuNode, Shield, StatusCommand, WindAction,
};

use super::orchestrator::{feasible_range, genset_views, status_commands, GensetView};
use super::recovery::{recovery_shield, RecoveryScenario};

/// Balance mismatch treated as zero (kW).
pub const BALANCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicrogridShieldConfig {
    /// Predictive recovery shield over the orchestrator command; `None`
    /// disables it.
    pub recovery: Option<RecoveryScenario>,
    /// Whether dispatch may fall back on genset overload and the battery
    /// reserve when normal limits cannot cover demand.
    pub reserves_allowed: bool,
}

impl Default for MicrogridShieldConfig {
    fn default() -> Self {
        Self {
            recovery: Some(RecoveryScenario::default()),
            reserves_allowed: true,
        }
    }
}

/// The microgrid's children as seen through its twin.
pub struct MicrogridView<'a> {
    pub battery: &'a BatteryState,
    pub battery_enforce: bool,
    pub wind: &'a WindTurbineState,
    pub gensets: Vec<GensetView<'a>>,
}

impl<'a> MicrogridView<'a> {
    /// Expects the child order battery, wind, orchestrator.
    pub fn new(children: &'a [ScuNode]) -> Result<Self> {
        let [battery, wind, orchestrator] = children else {
            return Err(contract(format!("microgrid expects 3 children, found {}", children.len())));
        };
        let b = battery.system.device().and_then(|d| d.as_battery());
        let w = wind.system.device().and_then(|d| d.as_wind());
        match (b, w, &orchestrator.shield) {
            (Some(b), Some(w), Shield::Orchestrator) => Ok(Self {
                battery: b,
                battery_enforce: battery.shield.enforces(),
                wind: w,
                gensets: genset_views(orchestrator.children())?,
            }),
            _ => Err(contract("microgrid children must be battery, wind and orchestrator SCUs")),
        }
    }
}

/// Setpoints resolved by the microgrid dispatch for one minute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPlan {
    pub delta: StatusCommand,
    pub p_batt: f64,
    pub allow_reserve: bool,
    pub p_wind: f64,
    pub p_orch: f64,
    pub overload: bool,
    /// Generation minus demand (kW); zero unless physically impossible.
    pub balance: f64,
}

/// Resolves the agent action into child setpoints.
///
/// 1. the battery setpoint is clipped to the battery limits;
/// 2. wind covers what the battery leaves, up to availability;
/// 3. gensets cover the rest within their feasible range;
/// 4. a surplus forced by genset floors is absorbed by charging, then by
///    curtailing wind;
/// 5. a shortage is covered by more battery discharge, then (when reserves are
///    allowed) genset overload and finally the battery reserve.
pub fn plan(view: &MicrogridView<'_>, action: MicrogridAction, exo: &Exogenous, reserves_allowed: bool) -> PowerPlan {
    let demand = exo.demand;
    let wind_avail = exo.wind_avail.clamp(0.0, view.wind.rated_kw);
    let commands = status_commands(&view.gensets, action.delta_orch);
    let (b_lo, b_hi) = view.battery.power_limits(false, view.battery_enforce);
    let (g_lo, g_hi) = feasible_range(&view.gensets, &commands, false);

    let requested = BatteryAction { p_setpoint: action.p_batt_setpoint, allow_reserve: false };
    let mut p_batt = battery_shield(view.battery, requested, view.battery_enforce).p_setpoint;
    let mut p_wind = (demand - p_batt).clamp(0.0, wind_avail);
    let mut p_orch = (demand - p_batt - p_wind).clamp(g_lo, g_hi);
    let mut allow_reserve = false;
    let mut overload = false;

    let surplus = p_batt + p_wind + p_orch - demand;
    if surplus > 0.0 {
        let charged = (p_batt - b_lo).max(0.0).min(surplus);
        p_batt -= charged;
        let curtailed = (surplus - charged).min(p_wind);
        p_wind -= curtailed;
    } else if surplus < 0.0 {
        let short = -surplus;
        let extra = (b_hi - p_batt).max(0.0).min(short);
        p_batt += extra;
        let mut short = short - extra;
        if short > BALANCE_TOLERANCE && reserves_allowed {
            let (_, g_hi_over) = feasible_range(&view.gensets, &commands, true);
            let extra = (g_hi_over - p_orch).max(0.0).min(short);
            if extra > 0.0 {
                p_orch += extra;
                short -= extra;
                overload = true;
            }
            if short > BALANCE_TOLERANCE {
                let (_, b_hi_res) = view.battery.power_limits(true, view.battery_enforce);
                let extra = (b_hi_res - p_batt).max(0.0).min(short);
                if extra > 0.0 {
                    p_batt += extra;
                    allow_reserve = true;
                }
            }
        }
    }
    PowerPlan {
        delta: action.delta_orch,
        p_batt,
        allow_reserve,
        p_wind,
        p_orch,
        overload,
        balance: p_batt + p_wind + p_orch - demand,
    }
}

/// Microgrid shield: recovery check on the status command, then power
/// resolution into battery, wind and orchestrator actions.
pub fn dispatch(
    config: &MicrogridShieldConfig,
    controller: &ControllerState,
    action: MicrogridAction,
    exo: &Exogenous,
) -> Result<Dispatch> {
    let mut note = DispatchNote { requested_delta: action.delta_orch, ..Default::default() };
    let mut action = MicrogridAction {
        delta_orch: action.delta_orch,
        p_batt_setpoint: if action.p_batt_setpoint.is_finite() { action.p_batt_setpoint } else { 0.0 },
    };
    if let Some(scenario) = &config.recovery {
        let outcome = recovery_shield(scenario, config, controller, action, exo)?;
        note.recovery_replaced = outcome.delta != action.delta_orch;
        note.recovery_exhausted = outcome.exhausted;
        note.failed_scenario = outcome.failed_scenario;
        action.delta_orch = outcome.delta;
    }
    let view = MicrogridView::new(controller.twin_children()?)?;
    let p = plan(&view, action, exo, config.reserves_allowed);
    let commands = status_commands(&view.gensets, p.delta);
    note.applied_delta = commands
        .iter()
        .copied()
        .find(|c| *c != StatusCommand::DoNothing)
        .unwrap_or(StatusCommand::DoNothing);
    note.reserve = p.allow_reserve;
    note.overload = p.overload;
    note.planned_balance = p.balance;
    note.intervened = note.applied_delta != note.requested_delta
        || (p.p_batt - action.p_batt_setpoint).abs() > BALANCE_TOLERANCE;
    let actions = vec![
        ActionBundle::Battery(BatteryAction { p_setpoint: p.p_batt, allow_reserve: p.allow_reserve }),
        ActionBundle::Wind(WindAction { p_setpoint: p.p_wind }),
        ActionBundle::Orchestrator(OrchestratorAction { delta: p.delta, p_setpoint: p.p_orch, overload: p.overload }),
    ];
    Ok(Dispatch { actions, note })
}
