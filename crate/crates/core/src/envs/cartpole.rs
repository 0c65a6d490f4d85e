//! Cart-pole with a continuous force input and viscous friction.
//!
//! State `(x, x_dot, theta, theta_dot)`, `theta = 0` upright and positive
//! when the pole leans toward `+x`. With total mass `M = m_c + m_p`, pole
//! half-length `l`, cart damping `b_c` and joint damping `b_p`:
//!
//! ```text
//! tmp        = (F - b_c x_dot + m_p l theta_dot² sin theta) / M
//! theta_ddot = (g sin theta - cos theta tmp - b_p theta_dot / (m_p l))
//!              / (l (4/3 - m_p cos² theta / M))
//! x_ddot     = tmp - m_p l theta_ddot cos theta / M
//! ```
//!
//! integrated with semi-implicit Euler (velocities first). The reward is 1
//! for every step taken; the episode terminates once `|theta| > 12°` or
//! `|x| > 2.4 m` and is truncated at 500 steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_finite, clip_action, EnvState, Environment, PhysicsParams, StepResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartPoleConstants {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub half_length: f64,
    pub cart_damping: f64,
    pub pole_damping: f64,
    pub force_bound: f64,
    pub theta_limit: f64,
    pub x_limit: f64,
    pub init_bound: f64,
    pub horizon: usize,
}

impl Default for CartPoleConstants {
    fn default() -> Self {
        CartPoleConstants {
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            cart_damping: 0.1,
            pole_damping: 0.002,
            force_bound: 10.0,
            theta_limit: 12.0 * std::f64::consts::PI / 180.0,
            x_limit: 2.4,
            init_bound: 0.05,
            horizon: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartPole {
    pub constants: CartPoleConstants,
    pub params: PhysicsParams,
}

impl Default for CartPole {
    fn default() -> Self {
        CartPole {
            constants: CartPoleConstants::default(),
            params: PhysicsParams::nominal(9.8),
        }
    }
}

impl CartPole {
    pub fn with_params(&self, params: PhysicsParams) -> Result<Self> {
        params.validate()?;
        Ok(CartPole {
            constants: self.constants,
            params,
        })
    }

    fn accelerations(&self, s: &[f64], force: f64) -> (f64, f64) {
        let c = &self.constants;
        let p = &self.params;
        let m_c = c.cart_mass * p.mass_scale;
        let m_p = c.pole_mass * p.mass_scale;
        let b_c = c.cart_damping * p.damping_scale;
        let b_p = c.pole_damping * p.damping_scale;
        let l = c.half_length;
        let total = m_c + m_p;
        let (x_dot, theta, theta_dot) = (s[1], s[2], s[3]);
        let (sin, cos) = theta.sin_cos();
        let tmp = (force - b_c * x_dot + m_p * l * theta_dot * theta_dot * sin) / total;
        let theta_acc = (p.gravity * sin - cos * tmp - b_p * theta_dot / (m_p * l))
            / (l * (4.0 / 3.0 - m_p * cos * cos / total));
        let x_acc = tmp - m_p * l * theta_acc * cos / total;
        (x_acc, theta_acc)
    }
}

impl Environment for CartPole {
    fn name(&self) -> &'static str {
        "cartpole"
    }

    fn state_dim(&self) -> usize {
        4
    }

    fn obs_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn action_bound(&self) -> f64 {
        self.constants.force_bound
    }

    fn horizon(&self) -> usize {
        self.constants.horizon
    }

    fn params(&self) -> PhysicsParams {
        self.params
    }

    /// Every component uniform in `±init_bound`.
    fn reset(&self, seed: u64) -> EnvState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = self.constants.init_bound;
        EnvState {
            values: (0..4).map(|_| rng.random_range(-b..=b)).collect(),
            step_counter: 0,
        }
    }

    fn step(&self, state: &EnvState, action: &[f64]) -> Result<StepResult> {
        if action.len() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: action.len(),
            });
        }
        let force = clip_action(action, self.constants.force_bound)[0];
        let s = &state.values;
        let (x_acc, theta_acc) = self.accelerations(s, force);
        let dt = self.params.timestep;
        let x_dot = s[1] + dt * x_acc;
        let x = s[0] + dt * x_dot;
        let theta_dot = s[3] + dt * theta_acc;
        let theta = s[2] + dt * theta_dot;
        let next = EnvState {
            values: vec![x, x_dot, theta, theta_dot],
            step_counter: state.step_counter + 1,
        };
        check_finite(&next)?;
        let terminated = theta.abs() > self.constants.theta_limit || x.abs() > self.constants.x_limit;
        let truncated = !terminated && next.step_counter >= self.constants.horizon;
        Ok(StepResult {
            state: next,
            reward: 1.0,
            terminated,
            truncated,
        })
    }

    fn observe(&self, state: &EnvState) -> Vec<f64> {
        state.values.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upright() -> EnvState {
        EnvState {
            values: vec![0.0; 4],
            step_counter: 0,
        }
    }

    #[test]
    fn reset_is_deterministic_and_bounded() {
        let env = CartPole::default();
        assert_eq!(env.reset(42), env.reset(42));
        assert_ne!(env.reset(42), env.reset(43));
        for seed in 0..200 {
            let s = env.reset(seed);
            assert!(s.values[2].abs() <= 0.05);
        }
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let env = CartPole::default();
        let r = env.step(&upright(), &[0.0]).unwrap();
        assert_eq!(r.state.values, vec![0.0; 4]);
        assert_eq!(r.reward, 1.0);
        assert!(!r.done());
    }

    #[test]
    fn heavier_pole_changes_angular_velocity() {
        let env = CartPole::default();
        let mut heavy = env.clone();
        heavy.constants.pole_mass *= 2.0;
        let a = env.step(&upright(), &[5.0]).unwrap();
        let b = heavy.step(&upright(), &[5.0]).unwrap();
        assert_ne!(a.state.values[3], b.state.values[3]);
    }

    #[test]
    fn actions_are_clipped() {
        let env = CartPole::default();
        let a = env.step(&upright(), &[10.0]).unwrap();
        let b = env.step(&upright(), &[1e6]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn horizon_truncates() {
        let env = CartPole::default();
        let mut s = upright();
        s.step_counter = 499;
        let r = env.step(&s, &[0.0]).unwrap();
        assert!(r.truncated && !r.terminated);
    }

    #[test]
    fn non_finite_state_diverges() {
        let env = CartPole::default();
        let s = EnvState {
            values: vec![0.0, f64::NAN, 0.0, 0.0],
            step_counter: 3,
        };
        assert!(matches!(
            env.step(&s, &[0.0]),
            Err(Error::EnvironmentDiverged { .. })
        ));
    }
}
