//! Cart-pole balancing with the classic constants and explicit Euler steps.
//!
//! | constant            | value           |
//! |---------------------|-----------------|
//! | gravity             | 9.8 m/s²        |
//! | cart mass           | 1.0 kg          |
//! | pole mass           | 0.1 kg          |
//! | pole half-length    | 0.5 m           |
//! | force magnitude     | 10 N            |
//! | timestep            | 0.02 s          |
//! | position limit      | ±2.4 m          |
//! | angle limit         | ±12° (0.2094 rad) |
//! | max steps           | 200             |
//!
//! Every step, including the failing one, yields reward 1.

use rand::{Rng, RngCore};

use super::{Environment, Step};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleConstants {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub half_length: f64,
    pub force_mag: f64,
    pub tau: f64,
    pub x_limit: f64,
    pub theta_limit: f64,
    pub max_steps: u32,
}

impl Default for CartPoleConstants {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            force_mag: 10.0,
            tau: 0.02,
            x_limit: 2.4,
            theta_limit: 12.0 * 2.0 * std::f64::consts::PI / 360.0,
            max_steps: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CartPole {
    pub constants: CartPoleConstants,
    /// `(x, ẋ, θ, θ̇)`
    state: [f64; 4],
    steps: u32,
    done: bool,
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new()
    }
}

impl CartPole {
    pub fn new() -> Self {
        Self {
            constants: CartPoleConstants::default(),
            state: [0.0; 4],
            steps: 0,
            done: true,
        }
    }

    pub fn with_state(state: [f64; 4], steps: u32) -> Self {
        Self {
            constants: CartPoleConstants::default(),
            state,
            steps,
            done: false,
        }
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }
}

impl Environment for CartPole {
    fn obs_dim(&self) -> usize {
        4
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        for v in &mut self.state {
            *v = rng.gen_range(-0.05..0.05);
        }
        self.steps = 0;
        self.done = false;
        self.state.to_vec()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if self.done {
            return Err(Error::EpisodeOver);
        }
        if action >= 2 {
            return Err(Error::DimensionMismatch {
                what: "cart-pole action",
                expected: 2,
                actual: action,
            });
        }
        let c = &self.constants;
        let [x, x_dot, theta, theta_dot] = self.state;
        let force = if action == 1 { c.force_mag } else { -c.force_mag };
        let total_mass = c.cart_mass + c.pole_mass;
        let pole_mass_length = c.pole_mass * c.half_length;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + pole_mass_length * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (c.gravity * sin - cos * temp)
            / (c.half_length * (4.0 / 3.0 - c.pole_mass * cos * cos / total_mass));
        let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;

        self.state = [
            x + c.tau * x_dot,
            x_dot + c.tau * x_acc,
            theta + c.tau * theta_dot,
            theta_dot + c.tau * theta_acc,
        ];
        self.steps += 1;

        let failed = self.state[0].abs() > c.x_limit || self.state[2].abs() > c.theta_limit;
        let truncated = !failed && self.steps >= c.max_steps;
        self.done = failed || truncated;
        Ok(Step {
            next_state: self.state.to_vec(),
            reward: 1.0,
            done: self.done,
            truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn reset_is_small_and_seeded() {
        let mut env = CartPole::new();
        let a = env.reset(&mut ChaCha8Rng::seed_from_u64(1));
        let b = env.reset(&mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.abs() < 0.05));
    }

    #[test]
    fn step_limit_truncates() {
        let mut env = CartPole::with_state([0.0; 4], 199);
        let s = env.step(0).unwrap();
        assert!(s.done && s.truncated);
        assert!(s.discount_active());
        assert!(matches!(env.step(0), Err(Error::EpisodeOver)));
    }

    #[test]
    fn falling_pole_terminates() {
        let mut env = CartPole::with_state([0.0, 0.0, 0.2, 2.0], 0);
        let s = env.step(1).unwrap();
        assert!(s.done && !s.truncated);
        assert!(!s.discount_active());
        assert_eq!(s.reward, 1.0);
    }

    #[test]
    fn euler_step_by_hand() {
        let mut env = CartPole::with_state([0.0; 4], 0);
        let s = env.step(1).unwrap();
        // upright, at rest: temp = 10/1.1, θ'' = -temp/(0.5·(4/3 - 0.1/1.1))
        let temp = 10.0 / 1.1;
        let theta_acc = -temp / (0.5 * (4.0 / 3.0 - 0.1 / 1.1));
        let x_acc = temp - 0.05 * theta_acc / 1.1;
        assert_eq!(s.next_state[0], 0.0);
        assert!((s.next_state[1] - 0.02 * x_acc).abs() < 1e-15);
        assert_eq!(s.next_state[2], 0.0);
        assert!((s.next_state[3] - 0.02 * theta_acc).abs() < 1e-15);
    }

    #[test]
    fn deterministic_given_state_and_action() {
        let mut a = CartPole::with_state([0.1, -0.2, 0.03, 0.1], 5);
        let mut b = a.clone();
        assert_eq!(a.step(0).unwrap(), b.step(0).unwrap());
    }

    #[test]
    fn invalid_action_rejected() {
        let mut env = CartPole::with_state([0.0; 4], 0);
        assert!(env.step(2).is_err());
    }
}
