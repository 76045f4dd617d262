//! Shielded controller units.
//!
//! An [`ScuNode`] binds a shield and a controller to a real subsystem: either
//! one device or an ordered list of child SCUs. The controller keeps a digital
//! twin of that subsystem. For composite nodes the twin holds a full copy of
//! every child SCU, controller included, so it can replay the whole subtree.

mod action;
mod shield;

pub use action::{
    ActionBundle, BatteryAction, Exogenous, GensetAction, MicrogridAction, OrchestratorAction, StatusCommand,
    WindAction,
};
pub use shield::{Dispatch, DispatchNote, Shield};

use crate::devices::{BatteryState, DeviceState, GensetState};
use crate::error::{contract, Result};

/// Real subsystem behind an SCU, or its replica inside a digital twin.
#[derive(Debug, Clone, PartialEq)]
pub enum Subsystem {
    Device(DeviceState),
    System(Vec<ScuNode>),
}

impl Subsystem {
    /// State estimation reported upward: the device state, or the
    /// aggregation of each child controller's own estimate.
    pub fn estimate(&self) -> Observation {
        match self {
            Subsystem::Device(d) => Observation::Device(d.clone()),
            Subsystem::System(children) => {
                Observation::System(children.iter().map(|c| c.controller.dt.estimate()).collect())
            }
        }
    }

    pub fn device(&self) -> Option<&DeviceState> {
        match self {
            Subsystem::Device(d) => Some(d),
            Subsystem::System(_) => None,
        }
    }

    pub fn children(&self) -> &[ScuNode] {
        match self {
            Subsystem::Device(_) => &[],
            Subsystem::System(c) => c,
        }
    }
}

/// State estimations flowing up the tree, shaped like the tree itself.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Device(DeviceState),
    System(Vec<Observation>),
}

impl Observation {
    /// Device states in depth-first child order.
    pub fn devices(&self) -> Vec<&DeviceState> {
        let mut out = Vec::new();
        self.collect_devices(&mut out);
        out
    }

    fn collect_devices<'a>(&'a self, out: &mut Vec<&'a DeviceState>) {
        match self {
            Observation::Device(d) => out.push(d),
            Observation::System(children) => children.iter().for_each(|c| c.collect_devices(out)),
        }
    }

    /// Total power delivered by all devices last minute (kW).
    pub fn total_output(&self) -> f64 {
        self.devices().iter().map(|d| d.p_out()).sum()
    }

    pub fn battery(&self) -> Option<&BatteryState> {
        self.devices().into_iter().find_map(|d| d.as_battery())
    }

    pub fn gensets(&self) -> Vec<&GensetState> {
        self.devices().into_iter().filter_map(|d| d.as_genset()).collect()
    }

    pub fn children(&self) -> &[Observation] {
        match self {
            Observation::Device(_) => &[],
            Observation::System(c) => c,
        }
    }
}

/// `StateEstim` hook turning a device observation into the twin's belief.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StateEstimator {
    /// Exact state copy (precise sensors).
    #[default]
    Exact,
    /// Battery SoC read through a sensor of finite resolution; every other
    /// field is copied exactly.
    SocQuantized { resolution: f64 },
}

impl StateEstimator {
    fn apply(self, twin: &mut DeviceState, obs: &DeviceState) {
        twin.clone_from(obs);
        if let (StateEstimator::SocQuantized { resolution }, DeviceState::Battery(b)) = (self, twin) {
            if resolution > 0.0 {
                b.soc = (b.soc / resolution).round() * resolution;
            }
        }
    }
}

/// Controller-internal state `s^SC`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScState {
    Device,
    /// Number of gensets not off, tracked to know which one moves next.
    Orchestrator { running: usize },
    /// Minutes elapsed since the tree was built.
    Microgrid { minutes: u64 },
}

impl ScState {
    fn update(&mut self, obs: &Observation) {
        match self {
            ScState::Device => {}
            ScState::Orchestrator { running } => {
                *running = obs.gensets().iter().filter(|g| !g.status.is_off()).count();
            }
            ScState::Microgrid { minutes } => *minutes += 1,
        }
    }
}

/// Controller state: internal state plus the digital twin of the subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub sc: ScState,
    pub dt: Subsystem,
    pub estimator: StateEstimator,
}

impl ControllerState {
    /// Controller update: internal hook, then twin update from `obs`.
    pub fn update(&mut self, obs: &Observation) -> Result<()> {
        self.sc.update(obs);
        update_dt(&mut self.dt, obs, self.estimator)
    }

    /// Twin children of a composite controller.
    pub fn twin_children(&self) -> Result<&[ScuNode]> {
        match &self.dt {
            Subsystem::System(c) => Ok(c),
            Subsystem::Device(d) => Err(contract(format!("expected a composite twin, found a {} device", d.kind()))),
        }
    }

    pub fn twin_device(&self) -> Result<&DeviceState> {
        self.dt
            .device()
            .ok_or_else(|| contract("expected a device twin, found a composite twin"))
    }
}

/// Functional form of [`ControllerState::update`].
pub fn update_controller(controller: &ControllerState, obs: &Observation) -> Result<ControllerState> {
    let mut next = controller.clone();
    next.update(obs)?;
    Ok(next)
}

/// Digital-twin update. A device twin applies the estimator; a composite twin
/// splits the observation by child order and updates every child's subsystem
/// replica and controller.
pub fn update_dt(dt: &mut Subsystem, obs: &Observation, estimator: StateEstimator) -> Result<()> {
    match (dt, obs) {
        (Subsystem::Device(twin), Observation::Device(o)) => {
            if std::mem::discriminant(twin) != std::mem::discriminant(o) {
                return Err(contract(format!("{} twin cannot absorb a {} observation", twin.kind(), o.kind())));
            }
            estimator.apply(twin, o);
            Ok(())
        }
        (Subsystem::System(children), Observation::System(parts)) => {
            if children.len() != parts.len() {
                return Err(contract(format!(
                    "observation has {} parts for {} child twins",
                    parts.len(),
                    children.len()
                )));
            }
            for (child, part) in children.iter_mut().zip(parts) {
                update_dt(&mut child.system, part, child.controller.estimator)?;
                child.controller.update(part)?;
            }
            Ok(())
        }
        (Subsystem::Device(twin), Observation::System(_)) => {
            Err(contract(format!("{} twin cannot absorb a composite observation", twin.kind())))
        }
        (Subsystem::System(_), Observation::Device(o)) => {
            Err(contract(format!("composite twin cannot absorb a {} observation", o.kind())))
        }
    }
}

/// One node of the SCU tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ScuNode {
    pub id: String,
    pub shield: Shield,
    pub controller: ControllerState,
    pub system: Subsystem,
    /// What the shield did on the last step.
    pub last_note: DispatchNote,
}

impl ScuNode {
    pub fn device(id: impl Into<String>, shield: Shield, state: DeviceState) -> Self {
        let controller = ControllerState {
            sc: ScState::Device,
            dt: Subsystem::Device(state.clone()),
            estimator: StateEstimator::Exact,
        };
        Self {
            id: id.into(),
            shield,
            controller,
            system: Subsystem::Device(state),
            last_note: DispatchNote::default(),
        }
    }

    pub fn system(id: impl Into<String>, shield: Shield, sc: ScState, children: Vec<ScuNode>) -> Self {
        let controller = ControllerState {
            sc,
            dt: Subsystem::System(children.clone()),
            estimator: StateEstimator::Exact,
        };
        Self {
            id: id.into(),
            shield,
            controller,
            system: Subsystem::System(children),
            last_note: DispatchNote::default(),
        }
    }

    /// Node whose "real" subsystem is a copy of a controller's twin. Stepping
    /// it replays the subtree without touching the live one.
    pub fn shadow(shield: Shield, controller: &ControllerState) -> Self {
        Self {
            id: "shadow".into(),
            shield,
            controller: controller.clone(),
            system: controller.dt.clone(),
            last_note: DispatchNote::default(),
        }
    }

    pub fn is_device(&self) -> bool {
        matches!(self.system, Subsystem::Device(_))
    }

    pub fn children(&self) -> &[ScuNode] {
        self.system.children()
    }

    /// Checks that every shield matches its subsystem and every twin has the
    /// shape of the subsystem it mirrors.
    pub fn validate(&self) -> Result<()> {
        let ok = match (&self.shield, &self.system) {
            (Shield::Wind, Subsystem::Device(DeviceState::Wind(_)))
            | (Shield::Battery { .. }, Subsystem::Device(DeviceState::Battery(_)))
            | (Shield::Genset { .. }, Subsystem::Device(DeviceState::Genset(_))) => true,
            (Shield::Orchestrator, Subsystem::System(c)) => {
                !c.is_empty() && c.iter().all(|n| matches!(n.shield, Shield::Genset { .. }))
            }
            (Shield::Microgrid(_), Subsystem::System(c)) => {
                c.len() == 3
                    && matches!(c[0].shield, Shield::Battery { .. })
                    && matches!(c[1].shield, Shield::Wind)
                    && matches!(c[2].shield, Shield::Orchestrator)
            }
            _ => false,
        };
        if !ok {
            return Err(contract(format!("node {} pairs a {} shield with the wrong subsystem", self.id, self.shield.level())));
        }
        if !same_shape(&self.system, &self.controller.dt) {
            return Err(contract(format!("node {}: twin does not mirror the subsystem", self.id)));
        }
        self.children().iter().try_for_each(ScuNode::validate)
    }

    /// The SCU step: shield dispatch, subsystem step (device physics or the
    /// children's own steps), controller update. Returns the twin's state
    /// estimation.
    pub fn step(&mut self, action: &ActionBundle, exo: &Exogenous) -> Result<Observation> {
        let Dispatch { actions, note } = self.shield.dispatch(&self.controller, action, exo)?;
        let obs = match &mut self.system {
            Subsystem::Device(dev) => {
                let [a] = actions.as_slice() else {
                    return Err(contract(format!("device shield produced {} actions", actions.len())));
                };
                dev.step(a, exo)?;
                Observation::Device(dev.clone())
            }
            Subsystem::System(children) => {
                if children.len() != actions.len() {
                    return Err(contract(format!(
                        "shield produced {} actions for {} children",
                        actions.len(),
                        children.len()
                    )));
                }
                let parts = children
                    .iter_mut()
                    .zip(&actions)
                    .map(|(child, a)| child.step(a, exo))
                    .collect::<Result<Vec<_>>>()?;
                Observation::System(parts)
            }
        };
        self.controller.update(&obs)?;
        self.last_note = note;
        Ok(self.controller.dt.estimate())
    }
}

fn same_shape(a: &Subsystem, b: &Subsystem) -> bool {
    match (a, b) {
        (Subsystem::Device(x), Subsystem::Device(y)) => std::mem::discriminant(x) == std::mem::discriminant(y),
        (Subsystem::System(x), Subsystem::System(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| same_shape(&p.system, &q.system))
        }
        _ => false,
    }
}

/// Projects the subsystem of a controller forward under `actions` and the
/// matching exogenous inputs, on a private copy of its twin.
pub fn simulate(
    shield: &Shield,
    controller: &ControllerState,
    actions: &[ActionBundle],
    exo: &[Exogenous],
) -> Result<Vec<Observation>> {
    if actions.len() != exo.len() {
        return Err(contract(format!(
            "{} actions for {} exogenous samples",
            actions.len(),
            exo.len()
        )));
    }
    let mut shadow = ScuNode::shadow(shield.clone(), controller);
    actions.iter().zip(exo).map(|(a, e)| shadow.step(a, e)).collect()
}
