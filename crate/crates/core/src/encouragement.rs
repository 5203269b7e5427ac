//! Priority encouragement: decaying priority growth for the transitions that
//! precede a goal transition in insertion order.
//!
//! For a goal with priority `p_n`, the transition `i` pushes earlier gets
//! `p ← min(p_n·ρ^i + p, cap)` for `i = 1..=W`, where `W = ⌊ln 0.01 / ln ρ⌋`
//! stops the walk once the growth falls under 1% of `p_n`. The cap is `p_n`
//! itself for the multi-goal rule and the store-wide maximum priority for the
//! single-goal sequence baseline. A priority already at or above the cap is
//! left alone, so encouragement never lowers anything.
//!
//! The walk stops early at the oldest live entry of the ring and at an
//! episode boundary.

use crate::error::{Error, Result};
use crate::store::{PrioritizedStore, SlotId};

/// Growth threshold relative to the goal priority.
pub const GROWTH_FLOOR: f64 = 0.01;

/// Largest `W` with `W ≤ ln 0.01 / ln ρ`; `ρ = 0` gives 0.
pub fn compute_window(rho: f64) -> Result<usize> {
    if rho == 0.0 {
        return Ok(0);
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::config("rho", format!("decay coefficient must lie in [0, 1), got {rho}")));
    }
    let ratio = GROWTH_FLOOR.ln() / rho.ln();
    let mut window = ratio.floor();
    // ln of decimal inputs is inexact; exact powers such as 0.1^2 = 0.01 land a hair below
    if (ratio - (window + 1.0)).abs() < 1e-9 {
        window += 1.0;
    }
    Ok(window as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncouragementState {
    rho0: f64,
    rho: f64,
    window: usize,
    episode: u64,
    total_episodes: u64,
}

impl EncouragementState {
    pub fn new(rho0: f64, total_episodes: u64) -> Result<Self> {
        if total_episodes == 0 {
            return Err(Error::config("episodes", "must be positive"));
        }
        let window = compute_window(rho0)?;
        Ok(Self {
            rho0,
            rho: rho0,
            window,
            episode: 0,
            total_episodes,
        })
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    /// `ρ = ρ0·(1 − e/e_total)`, zero past the last episode.
    pub fn decay_rho(&mut self, episode: u64) -> f64 {
        self.episode = episode;
        self.rho = if episode >= self.total_episodes {
            0.0
        } else {
            self.rho0 * (1.0 - episode as f64 / self.total_episodes as f64)
        };
        self.window = compute_window(self.rho).expect("decayed rho stays within [0, rho0]");
        self.rho
    }
}

/// Batch positions acting as goals: every position except one holding the
/// minimum priority (the earliest such position).
pub fn select_goals(priorities: &[f64]) -> Vec<usize> {
    let Some(excluded) = priorities
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |best, (i, &p)| match best {
            Some((_, bp)) if bp <= p => best,
            _ => Some((i, p)),
        })
        .map(|(i, _)| i)
    else {
        return Vec::new();
    };
    (0..priorities.len()).filter(|&i| i != excluded).collect()
}

/// Position of the first maximum priority, the single goal of the sequence
/// baseline.
pub fn select_max_goal(priorities: &[f64]) -> Option<usize> {
    priorities
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |best, (i, &p)| match best {
            Some((_, bp)) if bp >= p => best,
            _ => Some((i, p)),
        })
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthCap {
    /// Cap at the goal's own priority.
    Goal,
    /// Cap at the largest priority in the store.
    StoreMax,
}

/// Applies decaying growth to the predecessors of `goal`. Returns the number
/// of slots visited.
pub fn encourage(
    store: &mut PrioritizedStore,
    goal: SlotId,
    rho: f64,
    window: usize,
    cap: GrowthCap,
) -> usize {
    let (goal_priority, goal_episode) = match store.get(goal) {
        Ok(t) => (t.priority, t.episode),
        Err(err) => {
            log::warn!("skipping encouragement for stale goal: {err}");
            return 0;
        }
    };
    let ceiling = match cap {
        GrowthCap::Goal => goal_priority,
        GrowthCap::StoreMax => store.max_priority().unwrap_or(goal_priority),
    };
    let mut touched = 0;
    for step in 1..=window {
        let Some(prev) = store.predecessor(goal, step) else {
            break;
        };
        let current = match store.get(prev) {
            Ok(t) if t.episode == goal_episode => t.priority,
            _ => break,
        };
        let grown = (goal_priority * rho.powi(step as i32) + current).min(ceiling);
        if grown > current {
            store
                .update_priority(prev, grown)
                .expect("predecessor handle is live");
        }
        touched += 1;
    }
    touched
}
