//! Genset orchestrator: one status change at a time in priority order, and
//! equal power fraction across running gensets.

use crate::devices::{GensetState, GensetStatus};
use crate::error::{contract, Result};
use crate::scu::{ActionBundle, Dispatch, GensetAction, OrchestratorAction, ScuNode, Shield, StatusCommand};

/// A genset as seen by a composite shield: twin state plus whether its own
/// shield enforces the operational constraints.
#[derive(Debug, Clone, Copy)]
pub struct GensetView<'a> {
    pub state: &'a GensetState,
    pub enforce: bool,
}

impl GensetView<'_> {
    /// Highest setpoint allowed while on.
    fn cap(&self, overload: bool) -> f64 {
        if self.enforce {
            self.state.available_cap(overload)
        } else {
            self.state.params.p_max_kw
        }
    }

    fn floor_fraction(&self) -> f64 {
        if self.enforce {
            self.state.params.p_min_kw / self.state.params.p_nominal_kw
        } else {
            0.0
        }
    }
}

/// Reads genset views from the twin children of an orchestrator.
pub fn genset_views(children: &[ScuNode]) -> Result<Vec<GensetView<'_>>> {
    children
        .iter()
        .map(|node| match (node.system.device().and_then(|d| d.as_genset()), &node.shield) {
            (Some(state), Shield::Genset { enforce }) => Ok(GensetView { state, enforce: *enforce }),
            _ => Err(contract(format!("orchestrator child {} is not a genset SCU", node.id))),
        })
        .collect()
}

/// Maps the group command onto per-genset commands. Start goes to the first
/// genset that is off, provided its predecessor is warming up or on. Stop
/// goes to the last committed genset, provided it may stop. Anything else
/// becomes `DoNothing` everywhere.
pub fn status_commands(gensets: &[GensetView<'_>], delta: StatusCommand) -> Vec<StatusCommand> {
    let mut commands = vec![StatusCommand::DoNothing; gensets.len()];
    match delta {
        StatusCommand::Start => {
            if let Some(i) = gensets.iter().position(|g| g.state.status.is_off()) {
                if i == 0 || gensets[i - 1].state.status.is_committed() {
                    commands[i] = StatusCommand::Start;
                }
            }
        }
        StatusCommand::Stop => {
            if let Some(i) = gensets.iter().rposition(|g| g.state.status.is_committed()) {
                if gensets[i].state.can_stop(gensets[i].enforce) {
                    commands[i] = StatusCommand::Stop;
                }
            }
        }
        StatusCommand::DoNothing => {}
    }
    commands
}

/// Statuses in force this minute once the commands are applied.
fn effective(gensets: &[GensetView<'_>], commands: &[StatusCommand]) -> Vec<GensetStatus> {
    gensets
        .iter()
        .zip(commands)
        .map(|(g, &c)| g.state.status.with_command(c, &g.state.params))
        .collect()
}

struct FractionBand {
    routine: f64,
    nominal_on: f64,
    f_lo: f64,
    f_hi: f64,
}

fn fraction_band(gensets: &[GensetView<'_>], statuses: &[GensetStatus], overload: bool) -> FractionBand {
    let mut band = FractionBand { routine: 0.0, nominal_on: 0.0, f_lo: 0.0, f_hi: f64::INFINITY };
    let mut any_on = false;
    for (g, s) in gensets.iter().zip(statuses) {
        match s.routine_power(&g.state.params) {
            Some(p) => band.routine += p,
            None => {
                any_on = true;
                let nominal = g.state.params.p_nominal_kw;
                band.nominal_on += nominal;
                band.f_lo = band.f_lo.max(g.floor_fraction());
                band.f_hi = band.f_hi.min(g.cap(overload) / nominal);
            }
        }
    }
    if !any_on {
        band.f_hi = 0.0;
    }
    band.f_lo = band.f_lo.min(band.f_hi);
    band
}

/// Per-genset setpoints: routine gensets keep their forced power, running
/// ones share the remainder at a common fraction of nominal power.
pub fn equal_power_fraction(
    gensets: &[GensetView<'_>],
    commands: &[StatusCommand],
    p_setpoint: f64,
    overload: bool,
) -> Vec<f64> {
    let statuses = effective(gensets, commands);
    let band = fraction_band(gensets, &statuses, overload);
    let f = if band.nominal_on > 0.0 {
        ((p_setpoint - band.routine) / band.nominal_on).clamp(band.f_lo, band.f_hi)
    } else {
        0.0
    };
    gensets
        .iter()
        .zip(&statuses)
        .map(|(g, s)| s.routine_power(&g.state.params).unwrap_or(f * g.state.params.p_nominal_kw))
        .collect()
}

/// Total genset power achievable this minute under the given commands.
pub fn feasible_range(gensets: &[GensetView<'_>], commands: &[StatusCommand], overload: bool) -> (f64, f64) {
    let statuses = effective(gensets, commands);
    let band = fraction_band(gensets, &statuses, overload);
    (
        band.routine + band.f_lo * band.nominal_on,
        band.routine + band.f_hi * band.nominal_on,
    )
}

/// Orchestrator shield.
pub fn dispatch(children: &[ScuNode], action: OrchestratorAction) -> Result<Dispatch> {
    let gensets = genset_views(children)?;
    let commands = status_commands(&gensets, action.delta);
    let p_setpoint = if action.p_setpoint.is_finite() { action.p_setpoint } else { 0.0 };
    let powers = equal_power_fraction(&gensets, &commands, p_setpoint, action.overload);
    let applied = commands
        .iter()
        .copied()
        .find(|c| *c != StatusCommand::DoNothing)
        .unwrap_or(StatusCommand::DoNothing);
    let actions = commands
        .iter()
        .zip(&powers)
        .map(|(&delta, &p)| ActionBundle::Genset(GensetAction { delta, p_setpoint: p, overload: action.overload }))
        .collect();
    let planned: f64 = powers.iter().sum();
    let mut d = Dispatch { actions, note: Default::default() };
    d.note.requested_delta = action.delta;
    d.note.applied_delta = applied;
    d.note.overload = action.overload;
    d.note.intervened = applied != action.delta || (planned - p_setpoint).abs() > 1e-9;
    d.note.planned_balance = planned - p_setpoint;
    Ok(d)
}
