//! Suite configuration file.
//!
//! ```toml
//! [experiment]
//! id = "cartpole"
//! seed = 7
//! seeds = [0, 1, 2]
//! frameworks = ["dalap", "per"]
//!
//! [agent]
//! batch_size = 64
//!
//! [framework.dalap]
//! target_sync_interval = 100
//! ```
//!
//! `[agent]` keys apply to every framework; `[framework.<name>]` overrides
//! them for one framework. Unknown keys are rejected with their location.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::approximator::LossKind;
use crate::config::{ExperimentConfig, Framework};
use crate::env::EnvKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_id")]
    pub id: String,
    #[serde(default)]
    pub seed: u64,
    /// Seed ordinals; each run's RNG seed is derived from it.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_frameworks")]
    pub frameworks: Vec<Framework>,
    #[serde(default = "default_env")]
    pub env: EnvKind,
    pub chain_length: Option<usize>,
    pub episodes: Option<u64>,
    pub budget: Option<u64>,
    /// Reward level used for episodes-to-threshold in summaries.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_id() -> String {
    "experiment".into()
}

fn default_seeds() -> Vec<u64> {
    (0..20).collect()
}

fn default_frameworks() -> Vec<Framework> {
    Framework::ALL.to_vec()
}

fn default_env() -> EnvKind {
    EnvKind::CartPole
}

fn default_threshold() -> f64 {
    195.0
}

fn default_jobs() -> usize {
    1
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            id: default_id(),
            seed: 0,
            seeds: default_seeds(),
            frameworks: default_frameworks(),
            env: default_env(),
            chain_length: None,
            episodes: None,
            budget: None,
            threshold: default_threshold(),
            jobs: default_jobs(),
        }
    }
}

/// Agent keys; any subset may be given.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub batch_size: Option<usize>,
    pub step_size: Option<f64>,
    pub replay_period: Option<usize>,
    pub capacity: Option<usize>,
    pub alpha: Option<f64>,
    pub beta0: Option<f64>,
    pub gamma: Option<f64>,
    pub priority_epsilon: Option<f64>,
    pub rho0: Option<f64>,
    pub epsilon_start: Option<f64>,
    pub epsilon_end: Option<f64>,
    pub epsilon_decay_steps: Option<u64>,
    pub target_sync_interval: Option<u64>,
    pub loss: Option<LossKind>,
    pub hidden: Option<Vec<usize>>,
    pub attention_dim: Option<usize>,
    pub freeze_priorities: Option<bool>,
}

impl AgentSection {
    fn apply(&self, c: &mut ExperimentConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    c.$field = v.clone();
                })*
            };
        }
        set!(
            batch_size,
            step_size,
            replay_period,
            capacity,
            alpha,
            beta0,
            gamma,
            priority_epsilon,
            rho0,
            epsilon_start,
            epsilon_end,
            target_sync_interval,
            loss,
            hidden,
            attention_dim,
            freeze_priorities
        );
        if self.epsilon_decay_steps.is_some() {
            c.epsilon_decay_steps = self.epsilon_decay_steps;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default)]
    pub framework: BTreeMap<Framework, AgentSection>,
}

impl SuiteConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let suite: SuiteConfig = toml::from_str(text).map_err(|e| Error::ConfigParse {
            path: path.to_path_buf(),
            source: Box::new(e),
        })?;
        suite.validate()?;
        Ok(suite)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Checks every framework's resolved config.
    pub fn validate(&self) -> Result<()> {
        if self.experiment.seeds.is_empty() {
            return Err(Error::config("experiment.seeds", "at least one seed is required"));
        }
        if self.experiment.frameworks.is_empty() {
            return Err(Error::config("experiment.frameworks", "at least one framework is required"));
        }
        if self.experiment.jobs == 0 {
            return Err(Error::config("experiment.jobs", "must be positive"));
        }
        for f in Framework::ALL {
            self.resolve(f, 0).validate()?;
        }
        Ok(())
    }

    /// Resolved configuration for one framework, with the RNG seed set.
    pub fn resolve(&self, framework: Framework, run_seed: u64) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(framework);
        c.env = self.experiment.env;
        if let Some(v) = self.experiment.chain_length {
            c.chain_length = v;
        }
        if let Some(v) = self.experiment.episodes {
            c.episodes = v;
        }
        if let Some(v) = self.experiment.budget {
            c.budget = v;
        }
        self.agent.apply(&mut c);
        if let Some(section) = self.framework.get(&framework) {
            section.apply(&mut c);
        }
        c.seed = run_seed;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SuiteConfig> {
        SuiteConfig::parse(text, Path::new("suite.toml"))
    }

    #[test]
    fn empty_file_uses_defaults() {
        let s = parse("").unwrap();
        assert_eq!(s.experiment.seeds.len(), 20);
        assert_eq!(s.resolve(Framework::Dalap, 5), {
            let mut c = ExperimentConfig::new(Framework::Dalap);
            c.seed = 5;
            c
        });
    }

    #[test]
    fn framework_sections_override_agent() {
        let s = parse(
            r#"
[experiment]
episodes = 50
frameworks = ["per", "dalap"]

[agent]
batch_size = 32
target_sync_interval = 10

[framework.dalap]
target_sync_interval = 20
loss = "mse"
"#,
        )
        .unwrap();
        let d = s.resolve(Framework::Dalap, 0);
        let p = s.resolve(Framework::Per, 0);
        assert_eq!((d.batch_size, d.target_sync_interval, d.loss), (32, 20, LossKind::Mse));
        assert_eq!((p.batch_size, p.target_sync_interval, p.loss), (32, 10, LossKind::Mse));
        assert_eq!(d.episodes, 50);
    }

    #[test]
    fn unknown_key_names_field_and_line() {
        let err = parse("[agent]\nbatch_size = 8\nlearning_rate = 0.1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("learning_rate"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_framework_section_rejected() {
        let msg = parse("[framework.rainbow]\nalpha = 0.5\n").unwrap_err().to_string();
        assert!(msg.contains("rainbow"), "{msg}");
    }

    #[test]
    fn invalid_value_is_named() {
        let msg = parse("[agent]\ngamma = 1.5\n").unwrap_err().to_string();
        assert!(msg.contains("gamma"), "{msg}");
    }
}
