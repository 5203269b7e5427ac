//! Sampling distributions and importance weights for proportional replay.
//!
//! The prioritized store keeps already-transformed priorities in its sum
//! tree, so `P(i) = f(p_i) / Σ_j f(p_j)` is a leaf divided by the root, where
//! `f` is [`SamplingPolicy::transform_priority`]:
//!
//! ```text
//! per:     f(p) = p^α
//! lap:     f(p) = max(p^α, 1)
//! uniform: f(p) = 1
//! ```
//!
//! Importance weights are `w(i) = (1 / (N·P(i)))^β`, normalized by the largest
//! weight over the whole store, which is the weight of the minimum-probability
//! entry. The normalized weight is therefore `(min_j P(j) / P(i))^β`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{PriorityTransform, SlotId, StorePair, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    Uniform,
    Per,
    Lap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPolicy {
    mode: SamplingMode,
    alpha: f64,
    epsilon: f64,
}

impl SamplingPolicy {
    pub fn new(mode: SamplingMode, alpha: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::config("alpha", format!("must lie in [0, 1], got {alpha}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::config(
                "priority_epsilon",
                format!("must be positive, got {epsilon}"),
            ));
        }
        Ok(Self {
            mode,
            alpha,
            epsilon,
        })
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn transform_priority(&self, p: f64) -> f64 {
        match self.mode {
            SamplingMode::Uniform => 1.0,
            SamplingMode::Per => p.powf(self.alpha),
            SamplingMode::Lap => p.powf(self.alpha).max(1.0),
        }
    }
}

impl PriorityTransform for SamplingPolicy {
    fn apply(&self, priority: f64) -> f64 {
        self.transform_priority(priority)
    }
}

/// `P(i)` for every stored transition, in slot order.
pub fn probability_of(policy: &SamplingPolicy, priorities: &[f64]) -> Result<Vec<f64>> {
    if priorities.is_empty() {
        return Err(Error::EmptyStore);
    }
    let transformed: Vec<f64> = priorities
        .iter()
        .map(|&p| policy.transform_priority(p))
        .collect();
    let total: f64 = transformed.iter().sum();
    Ok(transformed.into_iter().map(|f| f / total).collect())
}

/// Unnormalized weight `(1 / (N·P(i)))^β`.
#[inline]
pub fn raw_importance_weight(probability: f64, n: usize, beta: f64) -> f64 {
    (1.0 / (n as f64 * probability)).powf(beta)
}

/// Normalized weights for the entries at `batch`, dividing by the maximum
/// weight over the full `probabilities` vector.
pub fn importance_weights(probabilities: &[f64], batch: &[usize], beta: f64, n: usize) -> Vec<f64> {
    let max_w = probabilities
        .iter()
        .map(|&p| raw_importance_weight(p, n, beta))
        .fold(0.0, f64::max);
    batch
        .iter()
        .map(|&i| raw_importance_weight(probabilities[i], n, beta) / max_w)
        .collect()
}

/// Which buffer a minibatch is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    /// Proportional sampling from the prioritized store.
    Prioritized,
    /// Uniform sampling from the mirror store.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct Minibatch {
    pub ids: Vec<SlotId>,
    pub transitions: Vec<Transition>,
    /// Sampling probability of each entry at draw time.
    pub probabilities: Vec<f64>,
    /// Smallest sampling probability over the whole store at draw time.
    pub min_probability: f64,
    /// Store fill level at draw time.
    pub store_len: usize,
    /// Normalized importance weights; all 1 until [`Minibatch::assign_weights`].
    pub weights: Vec<f64>,
    pub td_errors: Vec<f64>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Priorities recorded on the sampled transitions.
    pub fn priorities(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.priority).collect()
    }

    /// Fills `weights` with `w(i) / max_j w(j)` at the given β.
    pub fn assign_weights(&mut self, beta: f64) {
        let max_w = raw_importance_weight(self.min_probability, self.store_len, beta);
        self.weights = self
            .probabilities
            .iter()
            .map(|&p| (raw_importance_weight(p, self.store_len, beta) / max_w).min(1.0))
            .collect();
    }
}

/// Draws `m` transitions. The prioritized arm uses stratified sampling: one
/// uniform draw in each of `m` equal sub-intervals of `[0, 1)`. The uniform
/// arm draws slot indices from the mirror. Duplicates are kept.
pub fn draw_minibatch<R: Rng + ?Sized>(
    pair: &StorePair,
    m: usize,
    arm: Arm,
    rng: &mut R,
) -> Result<Minibatch> {
    let have = pair.len();
    if m == 0 || have < m {
        return Err(Error::WarmupIncomplete { have, need: m.max(1) });
    }
    let mut ids = Vec::with_capacity(m);
    let mut transitions = Vec::with_capacity(m);
    let mut probabilities = Vec::with_capacity(m);
    let min_probability;
    match arm {
        Arm::Prioritized => {
            let store = &pair.main;
            let total = store.total();
            for k in 0..m {
                let u = (k as f64 + rng.gen::<f64>()) / m as f64;
                let id = store.sample_mass(u)?;
                probabilities.push(store.transformed(id.slot) / total);
                transitions.push(store.get(id)?.clone());
                ids.push(id);
            }
            min_probability = store.min_transformed().ok_or(Error::EmptyStore)? / total;
        }
        Arm::Uniform => {
            let p = 1.0 / have as f64;
            for _ in 0..m {
                let slot = pair.mirror.sample_uniform_index(rng.gen())?;
                let id = pair.main.id_at(slot).ok_or(Error::EmptyStore)?;
                transitions.push(pair.mirror.get(slot).ok_or(Error::EmptyStore)?.clone());
                probabilities.push(p);
                ids.push(id);
            }
            min_probability = p;
        }
    }
    Ok(Minibatch {
        ids,
        transitions,
        probabilities,
        min_probability,
        store_len: have,
        weights: vec![1.0; m],
        td_errors: vec![0.0; m],
    })
}
