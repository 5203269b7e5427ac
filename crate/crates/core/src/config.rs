//! Experiment configuration: every knob of the replay loop in one record.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::approximator::LossKind;
use crate::env::EnvKind;
use crate::error::{Error, Result};
use crate::sampling::SamplingMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    Uniform,
    Per,
    Lap,
    Pser,
    Alap,
    Dalap,
}

impl Framework {
    pub const ALL: [Framework; 6] = [
        Framework::Uniform,
        Framework::Per,
        Framework::Lap,
        Framework::Pser,
        Framework::Alap,
        Framework::Dalap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Framework::Uniform => "uniform",
            Framework::Per => "per",
            Framework::Lap => "lap",
            Framework::Pser => "pser",
            Framework::Alap => "alap",
            Framework::Dalap => "dalap",
        }
    }

    pub fn sampling_mode(self) -> SamplingMode {
        match self {
            Framework::Uniform => SamplingMode::Uniform,
            Framework::Lap => SamplingMode::Lap,
            Framework::Per | Framework::Pser | Framework::Alap | Framework::Dalap => SamplingMode::Per,
        }
    }

    pub fn default_loss(self) -> LossKind {
        match self {
            Framework::Uniform | Framework::Per | Framework::Pser => LossKind::Mse,
            Framework::Lap | Framework::Alap | Framework::Dalap => LossKind::Huber,
        }
    }

    /// Whether the replay loop draws a second, uniform minibatch.
    pub fn uses_mirror_arm(self) -> bool {
        matches!(self, Framework::Alap | Framework::Dalap)
    }

    /// Whether the run emits per-step β/Δ/ρ diagnostics.
    pub fn has_diagnostics(self) -> bool {
        matches!(self, Framework::Pser | Framework::Alap | Framework::Dalap)
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|f| f.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Framework {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|f| f.name() == lower)
            .ok_or_else(|| Error::UnknownFramework {
                name: s.to_string(),
                valid: Self::valid_names(),
            })
    }
}

/// Fully resolved settings for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub framework: Framework,
    pub env: EnvKind,
    pub chain_length: usize,
    /// Minibatch size `m`.
    pub batch_size: usize,
    /// Optimizer step size `σ`.
    pub step_size: f64,
    /// Replay period `K`: minibatches accumulated per optimizer step, and the
    /// number of initial steps before replay starts.
    pub replay_period: usize,
    /// Buffer capacity `N`.
    pub capacity: usize,
    pub alpha: f64,
    pub beta0: f64,
    /// Step budget `T`; no replay happens after it is spent.
    pub budget: u64,
    /// `e_total`.
    pub episodes: u64,
    pub gamma: f64,
    /// Priority floor `ε`.
    pub priority_epsilon: f64,
    pub rho0: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Steps over which exploration decays linearly; defaults to `T/2`.
    pub epsilon_decay_steps: Option<u64>,
    /// Replay phases between target-network copies.
    pub target_sync_interval: u64,
    pub loss: LossKind,
    pub hidden: Vec<usize>,
    /// Key dimension `d_k` of the attention projection.
    pub attention_dim: usize,
    /// Keep every priority at its entry value (sampler-symmetry checks).
    pub freeze_priorities: bool,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Defaults for the cart-pole DQN setting.
    pub fn new(framework: Framework) -> Self {
        Self {
            framework,
            env: EnvKind::CartPole,
            chain_length: 20,
            batch_size: 64,
            step_size: 0.001,
            replay_period: 1,
            capacity: 20_000,
            alpha: 0.6,
            beta0: 0.4,
            budget: 40_000,
            episodes: 200,
            gamma: 0.99,
            priority_epsilon: 1e-4,
            rho0: 0.65,
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            epsilon_decay_steps: None,
            target_sync_interval: 1,
            loss: framework.default_loss(),
            hidden: vec![24, 24, 24],
            attention_dim: 16,
            freeze_priorities: false,
            seed: 0,
        }
    }

    pub fn epsilon_decay_steps(&self) -> u64 {
        self.epsilon_decay_steps.unwrap_or(self.budget / 2)
    }

    /// Exploration rate after `step` environment steps.
    pub fn exploration_at(&self, step: u64) -> f64 {
        let decay = self.epsilon_decay_steps();
        if decay == 0 || step >= decay {
            return self.epsilon_end;
        }
        let frac = step as f64 / decay as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(field, "must be positive"))
            }
        };
        positive("batch_size", self.batch_size > 0)?;
        positive("replay_period", self.replay_period > 0)?;
        positive("capacity", self.capacity > 0)?;
        positive("episodes", self.episodes > 0)?;
        positive("target_sync_interval", self.target_sync_interval > 0)?;
        positive("attention_dim", self.attention_dim > 0)?;
        positive("step_size", self.step_size > 0.0 && self.step_size.is_finite())?;
        positive("priority_epsilon", self.priority_epsilon > 0.0 && self.priority_epsilon.is_finite())?;
        if self.batch_size > self.capacity {
            return Err(Error::config(
                "batch_size",
                format!("m = {} exceeds capacity N = {}", self.batch_size, self.capacity),
            ));
        }
        if self.budget < self.episodes {
            return Err(Error::config("budget", "must allow at least one step per episode"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("gamma", format!("must lie in (0, 1), got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("alpha", format!("must lie in [0, 1], got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.beta0) {
            return Err(Error::config("beta0", format!("must lie in [0, 1), got {}", self.beta0)));
        }
        if !(0.0..1.0).contains(&self.rho0) {
            return Err(Error::config("rho0", format!("must lie in [0, 1), got {}", self.rho0)));
        }
        for (field, v) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(field, format!("must lie in [0, 1], got {v}")));
            }
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden", "layer widths must be positive"));
        }
        if self.env == EnvKind::Chain && self.chain_length < 2 {
            return Err(Error::config("chain_length", "must be at least 2"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for f in Framework::ALL {
            ExperimentConfig::new(f).validate().unwrap();
        }
    }

    #[test]
    fn framework_names_round_trip() {
        for f in Framework::ALL {
            assert_eq!(f.name().parse::<Framework>().unwrap(), f);
        }
        let err = "rainbow".parse::<Framework>().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rainbow") && msg.contains("dalap") && msg.contains("uniform"));
    }

    #[test]
    fn invalid_values_name_their_field() {
        let mut c = ExperimentConfig::new(Framework::Dalap);
        c.batch_size = c.capacity + 1;
        assert!(c.validate().unwrap_err().to_string().contains("batch_size"));
        let mut c = ExperimentConfig::new(Framework::Dalap);
        c.gamma = 1.0;
        assert!(c.validate().unwrap_err().to_string().contains("gamma"));
        let mut c = ExperimentConfig::new(Framework::Dalap);
        c.rho0 = 1.0;
        assert!(c.validate().unwrap_err().to_string().contains("rho0"));
    }

    #[test]
    fn exploration_schedule_is_linear_then_flat() {
        let c = ExperimentConfig::new(Framework::Per);
        assert_eq!(c.exploration_at(0), 1.0);
        assert!((c.exploration_at(10_000) - 0.505).abs() < 1e-12);
        assert_eq!(c.exploration_at(20_000), 0.01);
        assert_eq!(c.exploration_at(39_000), 0.01);
    }
}
