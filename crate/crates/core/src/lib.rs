//! Prioritized experience replay samplers and a small DQN carrier.
//!
//! Six replay frameworks share one store, one network and one training loop:
//! uniform, PER, LAP, PSER, ALAP and DALAP. The [`harness`] module runs seed
//! sweeps over them and writes CSV summaries.

pub mod agent;
pub mod approximator;
pub mod config;
pub mod encouragement;
pub mod env;
pub mod error;
pub mod harness;
pub mod sampling;
pub mod selftest;
pub mod similarity;
pub mod store;

pub use config::{ExperimentConfig, Framework};
pub use error::{Error, Result};
