//! Seedable control environments with rescalable physics.
//!
//! Environments are stateless descriptions of dynamics: [`Environment::reset`]
//! produces an [`EnvState`] and [`Environment::step`] maps a state and an
//! action to the next state. Two instances never share mutable data, so
//! rollouts over many instances parallelize freely.

mod cartpole;
mod pendulum;

pub use cartpole::{CartPole, CartPoleConstants};
pub use pendulum::{wrap_angle, Pendulum, PendulumConstants};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiplicative scales applied to an environment's nominal constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsParams {
    /// Scale on every rigid body's mass.
    pub mass_scale: f64,
    /// Scale on every viscous damping coefficient.
    pub damping_scale: f64,
    /// Gravitational acceleration in m/s².
    pub gravity: f64,
    /// Integration timestep in seconds, in `(0, 0.05]`.
    pub timestep: f64,
}

impl PhysicsParams {
    pub fn nominal(gravity: f64) -> Self {
        PhysicsParams {
            mass_scale: 1.0,
            damping_scale: 1.0,
            gravity,
            timestep: 0.02,
        }
    }

    pub fn with_scales(self, mass_scale: f64, damping_scale: f64) -> Self {
        PhysicsParams {
            mass_scale,
            damping_scale,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass_scale", self.mass_scale),
            ("damping_scale", self.damping_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be a positive finite scale, got {v}"
                )));
            }
        }
        if !(self.timestep > 0.0 && self.timestep <= 0.05) {
            return Err(Error::InvalidInput(format!(
                "timestep must lie in (0, 0.05], got {}",
                self.timestep
            )));
        }
        if !self.gravity.is_finite() {
            return Err(Error::InvalidInput("gravity must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub values: Vec<f64>,
    pub step_counter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: EnvState,
    pub reward: f64,
    /// The episode ended in a failure state; no value beyond it.
    pub terminated: bool,
    /// The horizon was reached.
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeResult {
    pub total_reward: f64,
    pub length: usize,
    pub action_trace: Vec<Vec<f64>>,
    pub state_trace: Vec<Vec<f64>>,
    /// Per-step tracking error, if the environment defines a target.
    pub tracking_trace: Option<Vec<f64>>,
    pub diverged: bool,
}

pub trait Environment: Send + Sync {
    fn name(&self) -> &'static str;
    fn state_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Symmetric per-dimension action bound; actions are clipped to it.
    fn action_bound(&self) -> f64;
    fn horizon(&self) -> usize;
    fn params(&self) -> PhysicsParams;

    fn reset(&self, seed: u64) -> EnvState;
    fn step(&self, state: &EnvState, action: &[f64]) -> Result<StepResult>;
    fn observe(&self, state: &EnvState) -> Vec<f64>;

    /// Distance to the environment's target signal, when it has one.
    fn tracking_error(&self, _state: &EnvState) -> Option<f64> {
        None
    }
}

pub(crate) fn clip_action(action: &[f64], bound: f64) -> Vec<f64> {
    action.iter().map(|a| a.clamp(-bound, bound)).collect()
}

pub(crate) fn check_finite(state: &EnvState) -> Result<()> {
    if state.values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::EnvironmentDiverged {
            step: state.step_counter,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    CartPole,
    Pendulum,
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartpole" => Ok(EnvKind::CartPole),
            "pendulum" => Ok(EnvKind::Pendulum),
            other => Err(Error::InvalidInput(format!("unknown environment `{other}`"))),
        }
    }
}

/// Closed set of bundled environments, serializable into configs and
/// checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Env {
    CartPole(CartPole),
    Pendulum(Pendulum),
}

impl Env {
    pub fn nominal(kind: EnvKind) -> Self {
        match kind {
            EnvKind::CartPole => Env::CartPole(CartPole::default()),
            EnvKind::Pendulum => Env::Pendulum(Pendulum::default()),
        }
    }

    pub fn kind(&self) -> EnvKind {
        match self {
            Env::CartPole(_) => EnvKind::CartPole,
            Env::Pendulum(_) => EnvKind::Pendulum,
        }
    }

    /// Same environment with different physics; `self` is unchanged.
    pub fn with_params(&self, params: PhysicsParams) -> Result<Self> {
        Ok(match self {
            Env::CartPole(e) => Env::CartPole(e.with_params(params)?),
            Env::Pendulum(e) => Env::Pendulum(e.with_params(params)?),
        })
    }

    fn inner(&self) -> &dyn Environment {
        match self {
            Env::CartPole(e) => e,
            Env::Pendulum(e) => e,
        }
    }
}

impl Environment for Env {
    fn name(&self) -> &'static str {
        self.inner().name()
    }
    fn state_dim(&self) -> usize {
        self.inner().state_dim()
    }
    fn obs_dim(&self) -> usize {
        self.inner().obs_dim()
    }
    fn action_dim(&self) -> usize {
        self.inner().action_dim()
    }
    fn action_bound(&self) -> f64 {
        self.inner().action_bound()
    }
    fn horizon(&self) -> usize {
        self.inner().horizon()
    }
    fn params(&self) -> PhysicsParams {
        self.inner().params()
    }
    fn reset(&self, seed: u64) -> EnvState {
        self.inner().reset(seed)
    }
    fn step(&self, state: &EnvState, action: &[f64]) -> Result<StepResult> {
        self.inner().step(state, action)
    }
    fn observe(&self, state: &EnvState) -> Vec<f64> {
        self.inner().observe(state)
    }
    fn tracking_error(&self, state: &EnvState) -> Option<f64> {
        self.inner().tracking_error(state)
    }
}

/// Runs one episode with a deterministic controller.
pub fn run_episode<E, F>(env: &E, seed: u64, mut controller: F) -> Result<EpisodeResult>
where
    E: Environment + ?Sized,
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut state = env.reset(seed);
    let mut out = EpisodeResult {
        state_trace: vec![state.values.clone()],
        tracking_trace: env.tracking_error(&state).map(|_| Vec::new()),
        ..Default::default()
    };
    loop {
        let obs = env.observe(&state);
        let action = clip_action(&controller(&obs)?, env.action_bound());
        let step = match env.step(&state, &action) {
            Ok(s) => s,
            Err(Error::EnvironmentDiverged { .. }) => {
                out.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        out.total_reward += step.reward;
        out.length += 1;
        out.action_trace.push(action);
        out.state_trace.push(step.state.values.clone());
        if let (Some(trace), Some(err)) = (&mut out.tracking_trace, env.tracking_error(&step.state))
        {
            trace.push(err);
        }
        let done = step.done();
        state = step.state;
        if done {
            break;
        }
    }
    Ok(out)
}
