//! Shielded controller units (SCUs) for a remote wind, battery and genset
//! microgrid.
//!
//! The tree is built by [`systems::build_microgrid`]: a microgrid SCU over a
//! battery, a wind turbine and a genset orchestrator. Every SCU shields the
//! actions coming from above, steps its subsystem and keeps a digital twin of
//! it. [`env::MicrogridEnv`] wraps the tree as a decision process for agents.

pub mod audit;
pub mod cli;
pub mod config;
pub mod degradation;
pub mod devices;
pub mod env;
pub mod error;
pub mod exogenous;
pub mod metrics;
pub mod policies;
pub mod scu;
pub mod systems;

pub use error::{Error, Result};
