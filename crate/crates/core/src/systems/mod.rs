//! Composite SCUs: the genset orchestrator and the microgrid.

pub mod microgrid;
pub mod orchestrator;
pub mod recovery;

pub use microgrid::{plan, MicrogridShieldConfig, MicrogridView, PowerPlan, BALANCE_TOLERANCE};
pub use orchestrator::{equal_power_fraction, feasible_range, status_commands, GensetView};
pub use recovery::{candidates, recovery_shield, rollout_shortage, rollout_surplus, RecoveryOutcome, RecoveryScenario, Scenario};

use serde::{Deserialize, Serialize};

use crate::devices::{BatteryParams, BatteryState, DeviceState, GensetParams, GensetState, GensetStatus, WindTurbineState};
use crate::error::{Error, Result};
use crate::scu::{ScState, ScuNode, Shield};

/// Physical parameters of the whole microgrid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MicrogridParams {
    pub battery: BatteryParams,
    pub genset: GensetParams,
    pub gensets: usize,
    pub wind_rated_kw: f64,
}

impl Default for MicrogridParams {
    fn default() -> Self {
        Self {
            battery: BatteryParams::default(),
            genset: GensetParams::default(),
            gensets: 2,
            wind_rated_kw: 400.0,
        }
    }
}

impl MicrogridParams {
    pub fn validate(&self) -> Result<()> {
        self.battery.validate()?;
        self.genset.validate()?;
        if self.gensets == 0 || self.wind_rated_kw.is_nan() || self.wind_rated_kw < 0.0 {
            return Err(Error::Config(format!(
                "need at least one genset and a non-negative wind rating, got {} and {}",
                self.gensets, self.wind_rated_kw
            )));
        }
        Ok(())
    }
}

/// Initial physical state of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub soc: f64,
    /// One status per genset, in priority order.
    pub gensets: Vec<GensetStatus>,
}

impl InitialState {
    pub fn validate(&self, params: &MicrogridParams) -> Result<()> {
        let b = &params.battery;
        if !(b.soc_min..=b.soc_max).contains(&self.soc) {
            return Err(Error::InitialState(format!(
                "SoC {} outside [{}, {}]",
                self.soc, b.soc_min, b.soc_max
            )));
        }
        if self.gensets.len() != params.gensets {
            return Err(Error::InitialState(format!(
                "{} genset statuses for {} gensets",
                self.gensets.len(),
                params.gensets
            )));
        }
        for pair in self.gensets.windows(2) {
            if pair[1].is_committed() && !pair[0].is_committed() {
                return Err(Error::InitialState(format!("priority order broken: {:?}", self.gensets)));
            }
        }
        let g = &params.genset;
        for s in &self.gensets {
            let ok = match *s {
                GensetStatus::WarmUp(r) => (1..=g.warmup_minutes).contains(&r),
                GensetStatus::CoolDown(r) => (1..=g.cooldown_minutes).contains(&r),
                _ => true,
            };
            if !ok {
                return Err(Error::InitialState(format!("routine counter out of range: {s:?}")));
            }
        }
        Ok(())
    }
}

/// Which shields are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShieldSettings {
    /// Battery and genset operational constraints.
    pub device: bool,
    pub recovery: bool,
}

impl Default for ShieldSettings {
    fn default() -> Self {
        Self { device: true, recovery: true }
    }
}

/// Builds the microgrid SCU tree: battery, wind turbine and an orchestrator
/// over the gensets, in that child order.
pub fn build_microgrid(
    params: &MicrogridParams,
    init: &InitialState,
    shields: ShieldSettings,
    scenario: RecoveryScenario,
) -> Result<ScuNode> {
    params.validate()?;
    init.validate(params)?;
    scenario.validate()?;
    let enforce = shields.device;
    let battery = ScuNode::device(
        "battery",
        Shield::Battery { enforce },
        DeviceState::Battery(BatteryState::new(params.battery, init.soc)),
    );
    let wind = ScuNode::device("wind", Shield::Wind, DeviceState::Wind(WindTurbineState::new(params.wind_rated_kw)));
    let gensets = init
        .gensets
        .iter()
        .enumerate()
        .map(|(i, &status)| {
            ScuNode::device(
                format!("genset{}", i + 1),
                Shield::Genset { enforce },
                DeviceState::Genset(GensetState::new(params.genset, status)),
            )
        })
        .collect::<Vec<_>>();
    let running = init.gensets.iter().filter(|s| !s.is_off()).count();
    let orchestrator = ScuNode::system("orchestrator", Shield::Orchestrator, ScState::Orchestrator { running }, gensets);
    let config = MicrogridShieldConfig {
        recovery: shields.recovery.then_some(scenario),
        reserves_allowed: true,
    };
    let root = ScuNode::system(
        "microgrid",
        Shield::Microgrid(config),
        ScState::Microgrid { minutes: 0 },
        vec![battery, wind, orchestrator],
    );
    root.validate()?;
    Ok(root)
}
