//! Torque-limited pendulum swing-up.
//!
//! State `(theta, theta_dot)` with `theta = 0` upright and `theta = ±pi`
//! hanging. A point mass `m` on a massless rod of length `l` with joint
//! damping `b` follows
//!
//! ```text
//! theta_ddot = (g / l) sin theta + (u - b theta_dot) / (m l²)
//! ```
//!
//! under semi-implicit Euler. The network observes
//! `(cos theta, sin theta, theta_dot)`. The per-step reward is
//! `-(wrap(theta)² + 0.1 theta_dot² + 0.001 u²)`; there is no failure state
//! and episodes are truncated at 200 steps. The tracking target is the
//! upright position, so the tracking error is `|wrap(theta)|`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_finite, clip_action, EnvState, Environment, PhysicsParams, StepResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumConstants {
    pub mass: f64,
    pub length: f64,
    pub damping: f64,
    pub torque_bound: f64,
    pub init_velocity_bound: f64,
    pub horizon: usize,
}

impl Default for PendulumConstants {
    fn default() -> Self {
        PendulumConstants {
            mass: 1.0,
            length: 1.0,
            damping: 0.05,
            torque_bound: 2.0,
            init_velocity_bound: 1.0,
            horizon: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pendulum {
    pub constants: PendulumConstants,
    pub params: PhysicsParams,
}

impl Default for Pendulum {
    fn default() -> Self {
        Pendulum {
            constants: PendulumConstants::default(),
            params: PhysicsParams::nominal(10.0),
        }
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t + 2.0 * PI
    } else {
        t
    }
}

impl Pendulum {
    pub fn with_params(&self, params: PhysicsParams) -> Result<Self> {
        params.validate()?;
        Ok(Pendulum {
            constants: self.constants,
            params,
        })
    }

    /// Mechanical energy measured from the hanging rest position.
    pub fn energy(&self, state: &EnvState) -> f64 {
        let m = self.constants.mass * self.params.mass_scale;
        let l = self.constants.length;
        let (theta, omega) = (state.values[0], state.values[1]);
        0.5 * m * l * l * omega * omega + m * self.params.gravity * l * (1.0 + theta.cos())
    }
}

impl Environment for Pendulum {
    fn name(&self) -> &'static str {
        "pendulum"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn obs_dim(&self) -> usize {
        3
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn action_bound(&self) -> f64 {
        self.constants.torque_bound
    }

    fn horizon(&self) -> usize {
        self.constants.horizon
    }

    fn params(&self) -> PhysicsParams {
        self.params
    }

    /// Angle uniform in `(-pi, pi]`, velocity uniform in `±init_velocity_bound`.
    fn reset(&self, seed: u64) -> EnvState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = PI - rng.random_range(0.0..2.0 * PI);
        let vb = self.constants.init_velocity_bound;
        let omega = rng.random_range(-vb..=vb);
        EnvState {
            values: vec![theta, omega],
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
        let u = clip_action(action, self.constants.torque_bound)[0];
        let c = &self.constants;
        let m = c.mass * self.params.mass_scale;
        let b = c.damping * self.params.damping_scale;
        let l = c.length;
        let (theta, omega) = (state.values[0], state.values[1]);
        let acc = self.params.gravity / l * theta.sin() + (u - b * omega) / (m * l * l);
        let dt = self.params.timestep;
        let omega_next = omega + dt * acc;
        let theta_next = theta + dt * omega_next;
        let wrapped = wrap_angle(theta);
        let reward = -(wrapped * wrapped + 0.1 * omega * omega + 0.001 * u * u);
        let next = EnvState {
            values: vec![theta_next, omega_next],
            step_counter: state.step_counter + 1,
        };
        check_finite(&next)?;
        Ok(StepResult {
            truncated: next.step_counter >= c.horizon,
            state: next,
            reward,
            terminated: false,
        })
    }

    fn observe(&self, state: &EnvState) -> Vec<f64> {
        let (sin, cos) = state.values[0].sin_cos();
        vec![cos, sin, state.values[1]]
    }

    fn tracking_error(&self, state: &EnvState) -> Option<f64> {
        Some(wrap_angle(state.values[0]).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn hanging_rest_is_stable() {
        let env = Pendulum::default();
        let mut s = EnvState {
            values: vec![PI, 0.0],
            step_counter: 0,
        };
        for _ in 0..200 {
            s = env.step(&s, &[0.0]).unwrap().state;
        }
        assert!((s.values[0] - PI).abs() < 1e-10);
        assert!(s.values[1].abs() < 1e-10);
    }

    #[test]
    fn reset_angle_in_range() {
        let env = Pendulum::default();
        for seed in 0..1000 {
            let t = env.reset(seed).values[0];
            assert!(t > -PI && t <= PI);
        }
    }

    #[test]
    fn truncates_at_horizon_without_termination() {
        let env = Pendulum::default();
        let mut s = env.reset(1);
        let mut n = 0;
        loop {
            let r = env.step(&s, &[1.0]).unwrap();
            n += 1;
            assert!(!r.terminated);
            s = r.state;
            if r.truncated {
                break;
            }
        }
        assert_eq!(n, 200);
    }

    #[test]
    fn reward_is_zero_upright_at_rest() {
        let env = Pendulum::default();
        let s = EnvState {
            values: vec![0.0, 0.0],
            step_counter: 0,
        };
        assert_eq!(env.step(&s, &[0.0]).unwrap().reward, 0.0);
    }
}
