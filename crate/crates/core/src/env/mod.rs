//! Episodic environments with discrete actions.

mod cartpole;
mod chain;

pub use cartpole::{CartPole, CartPoleConstants};
pub use chain::SparseChain;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// The episode is over, for whatever reason.
    pub done: bool,
    /// The episode was cut by a step limit rather than reaching a terminal
    /// state; bootstrapping from `next_state` stays valid.
    pub truncated: bool,
}

impl Step {
    /// `γ_t` flag for the stored transition: off only at true terminals.
    pub fn discount_active(&self) -> bool {
        !self.done || self.truncated
    }
}

pub trait Environment: Send {
    fn obs_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<Step>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    CartPole,
    Chain,
}

pub fn make_env(kind: EnvKind, chain_length: usize) -> Box<dyn Environment> {
    match kind {
        EnvKind::CartPole => Box::new(CartPole::new()),
        EnvKind::Chain => Box::new(SparseChain::new(chain_length)),
    }
}
