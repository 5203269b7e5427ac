//! A sparse-reward corridor. Positions `0..L` are observed one-hot; action 0
//! moves left, action 1 right. Stepping right off position `L - 1` ends the
//! episode with reward 1, stepping left off position 0 ends it with reward
//! 0, and every other step pays nothing. Episodes start at `L / 2` and are
//! cut after `4L` steps.

use rand::RngCore;

use super::{Environment, Step};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SparseChain {
    length: usize,
    position: usize,
    steps: usize,
    done: bool,
}

impl SparseChain {
    pub fn new(length: usize) -> Self {
        let length = length.max(1);
        Self {
            length,
            position: length / 2,
            steps: 0,
            done: true,
        }
    }

    pub fn at(length: usize, position: usize) -> Self {
        Self {
            position,
            done: false,
            ..Self::new(length)
        }
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn position(&self) -> usize {
        self.position
    }

    fn observe(&self) -> Vec<f64> {
        let mut obs = vec![0.0; self.length];
        obs[self.position] = 1.0;
        obs
    }
}

impl Environment for SparseChain {
    fn obs_dim(&self) -> usize {
        self.length
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.position = self.length / 2;
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if self.done {
            return Err(Error::EpisodeOver);
        }
        self.steps += 1;
        let (reward, terminal) = match action {
            0 if self.position == 0 => (0.0, true),
            0 => {
                self.position -= 1;
                (0.0, false)
            }
            1 if self.position + 1 == self.length => (1.0, true),
            1 => {
                self.position += 1;
                (0.0, false)
            }
            other => {
                return Err(Error::DimensionMismatch {
                    what: "chain action",
                    expected: 2,
                    actual: other,
                })
            }
        };
        let truncated = !terminal && self.steps >= 4 * self.length;
        self.done = terminal || truncated;
        Ok(Step {
            next_state: self.observe(),
            reward,
            done: self.done,
            truncated,
        })
    }
}
