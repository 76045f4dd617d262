//! TOML configuration. Every section has a default for every key, so an
//! empty file is a valid configuration and `scu config` prints them all.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audit::AuditLimits;
use crate::devices::{BatteryParams, GensetParams};
use crate::env::{EnvConfig, Penalties};
use crate::error::{Error, Result};
use crate::exogenous::{ExogenousSeries, ForecastNoise, MINUTES_PER_DAY};
use crate::policies::HeuristicParams;
use crate::systems::{MicrogridParams, RecoveryScenario, ShieldSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicrogridSection {
    pub gensets: usize,
    pub wind_rated_kw: f64,
}

impl Default for MicrogridSection {
    fn default() -> Self {
        let p = MicrogridParams::default();
        Self { gensets: p.gensets, wind_rated_kw: p.wind_rated_kw }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverySection {
    /// Replace the demand and wind bounds and ramps below by the extremes of
    /// the series being simulated.
    pub derive_from_series: bool,
    pub scenario: RecoveryScenario,
}

impl Default for RecoverySection {
    fn default() -> Self {
        Self { derive_from_series: true, scenario: RecoveryScenario::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub alpha: f64,
    pub episode_minutes: usize,
    pub forecast_noise: ForecastNoise,
    pub penalties: Penalties,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            episode_minutes: MINUTES_PER_DAY,
            forecast_noise: ForecastNoise::default(),
            penalties: Penalties::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub battery: BatteryParams,
    pub genset: GensetParams,
    pub microgrid: MicrogridSection,
    pub recovery: RecoverySection,
    pub env: EnvSection,
    pub heuristic: HeuristicParams,
    pub audit: AuditLimits,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.params().validate()?;
        config.recovery.scenario.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }

    pub fn params(&self) -> MicrogridParams {
        MicrogridParams {
            battery: self.battery,
            genset: self.genset,
            gensets: self.microgrid.gensets,
            wind_rated_kw: self.microgrid.wind_rated_kw,
        }
    }

    pub fn scenario(&self, series: &ExogenousSeries) -> RecoveryScenario {
        let s = self.recovery.scenario;
        if self.recovery.derive_from_series {
            RecoveryScenario { surplus_horizon: s.surplus_horizon, ..series.recovery_scenario(s.horizon) }
        } else {
            s
        }
    }

    /// Environment settings for one run; the initial state is sampled.
    pub fn env_config(&self, series: &ExogenousSeries, seed: u64, shields: ShieldSettings) -> EnvConfig {
        EnvConfig {
            params: self.params(),
            shields,
            alpha: self.env.alpha,
            episode_minutes: self.env.episode_minutes,
            start_minute: None,
            init: None,
            seed,
            forecast_noise: self.env.forecast_noise,
            scenario: Some(self.scenario(series)),
            penalties: self.env.penalties,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn defaults_round_trip() {
        let c = Config::default();
        let text = c.to_toml();
        assert!(text.contains("[genset]") && text.contains("min_runtime_minutes = 30"));
        assert_eq!(Config::parse(&text).unwrap(), c);
    }

    #[test]
    fn partial_override() {
        let c = Config::parse("[env]\nalpha = 0.25\n[battery.degradation]\nwindow = 0.02\n").unwrap();
        assert_eq!(c.env.alpha, 0.25);
        assert_eq!(c.battery.degradation.window, 0.02);
        assert_eq!(c.genset, GensetParams::default());
    }

    #[test]
    fn typos_and_bad_values_rejected() {
        assert!(matches!(Config::parse("[env]\nalfa = 1.0\n"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("[battery]\nsoc_min = 0.95\n"), Err(Error::Config(_))));
    }
}
