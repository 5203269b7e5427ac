//! DQN carrier running the replay loop for every framework.
//!
//! Per environment step the transition is stored in both buffers. Once more
//! than `K` steps have elapsed (and the buffer holds a full minibatch), each
//! step runs one replay phase of `K` iterations:
//!
//! 1. prioritized minibatch from `D`
//! 2. goal selection and priority encouragement (DALAP, PSER)
//! 3. uniform minibatch from `D*` and the β estimate (DALAP, ALAP)
//! 4. TD errors, priority updates `p ← |δ| + ε`, importance weights
//! 5. gradient accumulation
//!
//! followed by a single optimizer step on the accumulated gradient and, every
//! `target_sync_interval` phases, a copy of the online net into the target.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::approximator::{Adam, DenseNet, Sample};
use crate::config::{ExperimentConfig, Framework};
use crate::encouragement::{self, EncouragementState, GrowthCap};
use crate::env::{make_env, Environment};
use crate::error::{Error, Result};
use crate::sampling::{draw_minibatch, Arm, Minibatch, SamplingPolicy};
use crate::similarity::{state_action_rows, AttentionParams, ParallelAttention};
use crate::store::{StorePair, Transition};

const STREAM_NET: u64 = 0;
const STREAM_ENV: u64 = 1;
const STREAM_EXPLORE: u64 = 2;
const STREAM_SAMPLER: u64 = 3;
const STREAM_ATTENTION: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// `r + γ·[γ_t]·max_a' Q_target(s', a')`.
pub fn bootstrap_target(target: &DenseNet, t: &Transition, gamma: f64) -> Result<f64> {
    if !t.discount_active {
        return Ok(t.reward);
    }
    let next = target.forward(&t.next_state)?;
    let best = next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(t.reward + gamma * best)
}

/// `δ = r + γ·[γ_t]·max_a' Q_target(s', a') − Q(s, a)`.
pub fn td_error(online: &DenseNet, target: &DenseNet, t: &Transition, gamma: f64) -> Result<f64> {
    let q = online.forward(&t.state)?;
    let qa = *q.get(t.action).ok_or(Error::DimensionMismatch {
        what: "action index",
        expected: q.len(),
        actual: t.action,
    })?;
    Ok(bootstrap_target(target, t, gamma)? - qa)
}

/// Index of the largest value; the lowest index wins ties.
pub fn greedy_action(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy action selection.
pub fn act<R: Rng + ?Sized>(net: &DenseNet, state: &[f64], exploration: f64, rng: &mut R) -> Result<usize> {
    let roll: f64 = rng.gen();
    if roll < exploration {
        return Ok(rng.gen_range(0..net.output_dim()));
    }
    Ok(greedy_action(&net.forward(state)?))
}

/// Per replay-phase values of the adaptive quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostic {
    pub step: u64,
    pub beta: Option<f64>,
    pub delta_i: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseReport {
    pub loss: f64,
    pub beta: f64,
    pub delta_i: Option<f64>,
    pub encouraged: u64,
    pub min_weight: f64,
    pub max_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub rewards: Vec<f64>,
    pub diagnostics: Vec<StepDiagnostic>,
    /// Slots touched by encouragement in each episode.
    pub encouraged: Vec<u64>,
    pub steps: u64,
    pub replay_phases: u64,
    /// Range of every importance weight used in a gradient.
    pub weight_range: (f64, f64),
    /// Replay iterations whose similarity increment was negative.
    pub negative_deltas: u64,
}

/// Agent state: networks, optimizer, buffers, and the framework-specific
/// machinery for β and encouragement.
pub struct DqnAgent {
    config: ExperimentConfig,
    online: DenseNet,
    target: DenseNet,
    optimizer: Adam,
    pair: StorePair,
    sampler_rng: ChaCha8Rng,
    attention: Option<ParallelAttention>,
    encouragement: EncouragementState,
    pser_window: usize,
    n_actions: usize,
    phases: u64,
}

impl DqnAgent {
    pub fn new(config: ExperimentConfig, obs_dim: usize, n_actions: usize) -> Result<Self> {
        config.validate()?;
        let mut sizes = vec![obs_dim];
        sizes.extend(&config.hidden);
        sizes.push(n_actions);
        let online = DenseNet::seeded(&sizes, &mut stream(config.seed, STREAM_NET))?;
        let target = online.clone();
        let optimizer = Adam::new(online.param_count(), config.step_size);
        let policy = SamplingPolicy::new(config.framework.sampling_mode(), config.alpha, config.priority_epsilon)?;
        let pair = StorePair::new(config.capacity, obs_dim, config.priority_epsilon, Arc::new(policy))?;
        let attention = if config.framework.uses_mirror_arm() {
            let mut rng = stream(config.seed, STREAM_ATTENTION);
            let shuffle_seed = rng.gen();
            let params = AttentionParams::random(obs_dim + n_actions, config.attention_dim, shuffle_seed, &mut rng)?;
            Some(ParallelAttention::new(params, config.beta0)?)
        } else {
            None
        };
        let encouragement = EncouragementState::new(config.rho0, config.episodes)?;
        let pser_window = encouragement::compute_window(config.rho0)?;
        Ok(Self {
            sampler_rng: stream(config.seed, STREAM_SAMPLER),
            online,
            target,
            optimizer,
            pair,
            attention,
            encouragement,
            pser_window,
            n_actions,
            phases: 0,
            config,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn online(&self) -> &DenseNet {
        &self.online
    }

    pub fn target(&self) -> &DenseNet {
        &self.target
    }

    pub fn store(&self) -> &StorePair {
        &self.pair
    }

    pub fn store_mut(&mut self) -> &mut StorePair {
        &mut self.pair
    }

    pub fn phases(&self) -> u64 {
        self.phases
    }

    pub fn rho(&self) -> f64 {
        self.encouragement.rho()
    }

    pub fn negative_deltas(&self) -> u64 {
        self.attention.as_ref().map_or(0, |a| a.negative_deltas())
    }

    pub fn begin_episode(&mut self, episode: u64) {
        if self.config.framework == Framework::Dalap {
            self.encouragement.decay_rho(episode);
        }
    }

    pub fn remember(&mut self, t: Transition) -> Result<()> {
        self.pair.push(t).map(|_| ())
    }

    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], exploration: f64, rng: &mut R) -> Result<usize> {
        act(&self.online, state, exploration, rng)
    }

    /// β used by the baselines with a fixed or scheduled exponent.
    fn scheduled_beta(&self, episode: u64) -> f64 {
        match self.config.framework {
            Framework::Uniform => 0.0,
            Framework::Lap => 1.0,
            _ => {
                let frac = (episode as f64 / self.config.episodes as f64).min(1.0);
                self.config.beta0 + (1.0 - self.config.beta0) * frac
            }
        }
    }

    fn encourage_goals(&mut self, batch: &Minibatch) -> u64 {
        let priorities = batch.priorities();
        let main = &mut self.pair.main;
        match self.config.framework {
            Framework::Dalap => {
                let (rho, window) = (self.encouragement.rho(), self.encouragement.window());
                if window == 0 {
                    return 0;
                }
                encouragement::select_goals(&priorities)
                    .into_iter()
                    .map(|g| encouragement::encourage(main, batch.ids[g], rho, window, GrowthCap::Goal) as u64)
                    .sum()
            }
            Framework::Pser => encouragement::select_max_goal(&priorities).map_or(0, |g| {
                encouragement::encourage(main, batch.ids[g], self.config.rho0, self.pser_window, GrowthCap::StoreMax)
                    as u64
            }),
            _ => 0,
        }
    }

    /// One replay phase. Fails with [`Error::WarmupIncomplete`] while the
    /// buffer holds fewer than `m` transitions.
    pub fn replay_phase(&mut self, episode: u64) -> Result<PhaseReport> {
        let m = self.config.batch_size;
        if self.pair.len() < m {
            return Err(Error::WarmupIncomplete {
                have: self.pair.len(),
                need: m,
            });
        }
        let framework = self.config.framework;
        let mut accumulated = vec![0.0; self.online.param_count()];
        let mut report = PhaseReport {
            loss: 0.0,
            beta: 0.0,
            delta_i: None,
            encouraged: 0,
            min_weight: f64::INFINITY,
            max_weight: f64::NEG_INFINITY,
        };
        for _ in 0..self.config.replay_period {
            let mut batch = draw_minibatch(&self.pair, m, Arm::Prioritized, &mut self.sampler_rng)?;
            report.encouraged += self.encourage_goals(&batch);

            let beta = if let Some(attention) = self.attention.as_mut() {
                let rus = draw_minibatch(&self.pair, m, Arm::Uniform, &mut self.sampler_rng)?;
                let rus_rows = state_action_rows(&rus, self.n_actions);
                let sim = if framework == Framework::Dalap {
                    attention.report(&state_action_rows(&batch, self.n_actions), &rus_rows)?
                } else {
                    attention.single_arm(&rus_rows)?
                };
                report.delta_i = Some(sim.delta);
                sim.beta
            } else {
                self.scheduled_beta(episode)
            };
            report.beta = beta;
            batch.assign_weights(beta);

            let mut targets = Vec::with_capacity(m);
            for t in &batch.transitions {
                targets.push(bootstrap_target(&self.target, t, self.config.gamma)?);
            }
            let samples: Vec<Sample> = batch
                .transitions
                .iter()
                .zip(&targets)
                .map(|(t, &target)| Sample {
                    state: &t.state,
                    action: t.action,
                    target,
                })
                .collect();
            let (loss, grads, deltas) = self.online.backward(&samples, &batch.weights, self.config.loss)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    what: "loss",
                    step: self.phases,
                    detail: format!("loss = {loss}, beta = {beta}"),
                });
            }
            if framework != Framework::Uniform && !self.config.freeze_priorities {
                for (id, d) in batch.ids.iter().zip(&deltas) {
                    self.pair.main.update_priority(*id, d.abs() + self.config.priority_epsilon)?;
                }
            }
            batch.td_errors = deltas;
            for w in &batch.weights {
                report.min_weight = report.min_weight.min(*w);
                report.max_weight = report.max_weight.max(*w);
            }
            for (a, g) in accumulated.iter_mut().zip(&grads) {
                *a += g;
            }
            report.loss += loss;
        }
        self.optimizer.step(self.online.params_mut(), &accumulated)?;
        self.phases += 1;
        if self.phases % self.config.target_sync_interval == 0 {
            self.target.copy_from(&self.online);
        }
        Ok(report)
    }
}

/// Runs `config.episodes` episodes and returns the reward trace with
/// diagnostics. A pure function of the configuration.
pub fn train(config: &ExperimentConfig) -> Result<TrainOutcome> {
    let mut env = make_env(config.env, config.chain_length);
    train_in(config, env.as_mut())
}

pub fn train_in(config: &ExperimentConfig, env: &mut dyn Environment) -> Result<TrainOutcome> {
    let mut agent = DqnAgent::new(config.clone(), env.obs_dim(), env.n_actions())?;
    let mut env_rng = stream(config.seed, STREAM_ENV);
    let mut explore_rng = stream(config.seed, STREAM_EXPLORE);
    let framework = config.framework;

    let mut outcome = TrainOutcome {
        rewards: Vec::with_capacity(config.episodes as usize),
        diagnostics: Vec::new(),
        encouraged: Vec::with_capacity(config.episodes as usize),
        steps: 0,
        replay_phases: 0,
        weight_range: (f64::INFINITY, f64::NEG_INFINITY),
        negative_deltas: 0,
    };
    let mut t: u64 = 0;
    for episode in 0..config.episodes {
        agent.begin_episode(episode);
        let mut state = env.reset(&mut env_rng);
        let mut total = 0.0;
        let mut encouraged = 0;
        loop {
            let action = agent.act(&state, config.exploration_at(t), &mut explore_rng)?;
            let step = env.step(action)?;
            t += 1;
            total += step.reward;
            agent.remember(Transition::new(
                state,
                action,
                step.reward,
                step.discount_active(),
                step.next_state.clone(),
                episode,
            ))?;
            if t > config.replay_period as u64 && t <= config.budget && agent.store().len() >= config.batch_size {
                let report = agent.replay_phase(episode)?;
                encouraged += report.encouraged;
                outcome.weight_range.0 = outcome.weight_range.0.min(report.min_weight);
                outcome.weight_range.1 = outcome.weight_range.1.max(report.max_weight);
                if framework.has_diagnostics() {
                    outcome.diagnostics.push(StepDiagnostic {
                        step: t,
                        beta: Some(report.beta),
                        delta_i: report.delta_i,
                        rho: match framework {
                            Framework::Dalap => Some(agent.rho()),
                            Framework::Pser => Some(config.rho0),
                            _ => None,
                        },
                    });
                }
            }
            state = step.next_state;
            if step.done {
                break;
            }
        }
        outcome.rewards.push(total);
        outcome.encouraged.push(encouraged);
    }
    outcome.steps = t;
    outcome.replay_phases = agent.phases();
    outcome.negative_deltas = agent.negative_deltas();
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{CartPole, EnvKind};

    fn zero_nets(obs: usize, actions: usize) -> (DenseNet, DenseNet) {
        let n = DenseNet::zeros(&[obs, 4, actions]).unwrap();
        (n.clone(), n)
    }

    #[test]
    fn td_error_examples() {
        let (online, target) = zero_nets(2, 2);
        let terminal = Transition::new(vec![0.1, 0.2], 1, 0.7, false, vec![0.0, 0.0], 0);
        assert_eq!(td_error(&online, &target, &terminal, 0.99).unwrap(), 0.7);
        let live = Transition::new(vec![0.1, 0.2], 0, 1.0, true, vec![0.3, 0.4], 0);
        assert_eq!(td_error(&online, &target, &live, 0.99).unwrap(), 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = DenseNet::seeded(&[2, 5, 2], &mut rng).unwrap();
        let q = net.forward(&live.state).unwrap()[0];
        let zero_gamma = td_error(&net, &net, &live, 0.0).unwrap();
        assert!((zero_gamma - (1.0 - q)).abs() < 1e-15);
    }

    #[test]
    fn greedy_and_tie_rules() {
        assert_eq!(greedy_action(&[0.1, 0.9]), 1);
        assert_eq!(greedy_action(&[0.5, 0.5, 0.2]), 0);
        let mut net = DenseNet::zeros(&[1, 2]).unwrap();
        net.layer_mut(0).1[1] = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(act(&net, &[0.0], 0.0, &mut rng).unwrap(), 1);
        let tied = DenseNet::zeros(&[1, 2]).unwrap();
        assert_eq!(act(&tied, &[0.0], 0.0, &mut rng).unwrap(), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let net = DenseNet::zeros(&[1, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            counts[act(&net, &[0.0], 1.0, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.02);
        }
    }

    fn small(framework: Framework) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(framework);
        c.episodes = 6;
        c.budget = 2_000;
        c.batch_size = 16;
        c.capacity = 500;
        c.hidden = vec![8];
        c.seed = 3;
        c
    }

    #[test]
    fn storage_only_before_replay_period() {
        let mut c = small(Framework::Per);
        c.replay_period = 4;
        c.batch_size = 1;
        let mut agent = DqnAgent::new(c.clone(), 4, 2).unwrap();
        let mut env = CartPole::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = env.reset(&mut rng);
        let before = agent.online().params().to_vec();
        for t in 1..=4u64 {
            let step = env.step(0).unwrap();
            agent
                .remember(Transition::new(s, 0, 1.0, true, step.next_state.clone(), 0))
                .unwrap();
            s = step.next_state;
            assert!(t <= c.replay_period as u64);
        }
        assert_eq!(agent.online().params(), &before[..]);
        assert!(agent.replay_phase(0).is_ok());
        assert_ne!(agent.online().params(), &before[..]);
    }

    #[test]
    fn warmup_is_reported() {
        let mut agent = DqnAgent::new(small(Framework::Dalap), 4, 2).unwrap();
        assert!(matches!(agent.replay_phase(0), Err(Error::WarmupIncomplete { .. })));
    }

    #[test]
    fn target_tracks_sync_interval() {
        let mut c = small(Framework::Dalap);
        c.target_sync_interval = 3;
        let mut agent = DqnAgent::new(c, 4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..40 {
            let s: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            agent
                .remember(Transition::new(s, i % 2, 1.0, i % 7 != 0, n, 0))
                .unwrap();
        }
        let mut frozen = agent.target().clone();
        for phase in 1..=9u64 {
            agent.replay_phase(0).unwrap();
            if phase % 3 == 0 {
                assert_eq!(agent.target(), agent.online());
                frozen = agent.target().clone();
            } else {
                assert_eq!(agent.target(), &frozen);
                assert_ne!(agent.target(), agent.online());
            }
        }
    }

    #[test]
    fn uniform_weights_stay_one() {
        let out = train(&small(Framework::Uniform)).unwrap();
        assert!(out.replay_phases > 0);
        assert_eq!(out.weight_range, (1.0, 1.0));
        assert!(out.diagnostics.is_empty());
    }

    #[test]
    fn fixed_seed_is_bit_reproducible() {
        for f in [Framework::Dalap, Framework::Pser, Framework::Alap] {
            let a = train(&small(f)).unwrap();
            let b = train(&small(f)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.rewards.len(), 6);
        }
        let mut other = small(Framework::Dalap);
        other.seed = 4;
        assert_ne!(train(&other).unwrap().rewards, train(&small(Framework::Dalap)).unwrap().rewards);
    }

    #[test]
    fn pinned_per_matches_uniform() {
        let mut per = small(Framework::Per);
        per.freeze_priorities = true;
        per.loss = crate::approximator::LossKind::Mse;
        let uniform = small(Framework::Uniform);
        let a = train(&per).unwrap();
        let b = train(&uniform).unwrap();
        assert_eq!(a.rewards, b.rewards);
        assert_eq!(a.weight_range, (1.0, 1.0));
    }

    #[test]
    fn dalap_traces_stay_in_range() {
        let c = small(Framework::Dalap);
        let out = train(&c).unwrap();
        assert!(!out.diagnostics.is_empty());
        let mut episode_of_step = Vec::new();
        let mut t = 0;
        for (e, r) in out.rewards.iter().enumerate() {
            for _ in 0..*r as u64 {
                t += 1;
                episode_of_step.push((t, e as u64));
            }
        }
        for d in &out.diagnostics {
            let beta = d.beta.unwrap();
            assert!((c.beta0..=1.0).contains(&beta));
            let e = episode_of_step[(d.step - 1) as usize].1;
            let rho = c.rho0 * (1.0 - e as f64 / c.episodes as f64);
            assert_eq!(d.rho.unwrap(), rho);
        }
    }

    #[test]
    fn chain_environment_runs() {
        let mut c = small(Framework::Dalap);
        c.env = EnvKind::Chain;
        c.chain_length = 6;
        let out = train(&c).unwrap();
        assert_eq!(out.rewards.len(), 6);
        assert!(out.rewards.iter().all(|&r| r == 0.0 || r == 1.0));
    }
}
