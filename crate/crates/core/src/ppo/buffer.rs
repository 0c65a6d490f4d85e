//! Rollout storage and (worst-case) generalized advantage estimation.
//!
//! Transitions are stored flat; each carries two flags:
//!
//! * `terminal`: the episode failed at `next_obs`, so nothing is
//!   bootstrapped beyond it.
//! * `boundary`: the advantage recursion stops after this transition. Set
//!   on terminal steps, on horizon truncations and on the last step of a
//!   collection segment. Non-terminal boundaries still bootstrap from the
//!   critic at `next_obs`.
//!
//! With bootstrap value `B_t` (zero on terminal steps):
//!
//! ```text
//! delta_t = r_t + gamma B_t - V(s_t)
//! A_t     = delta_t + gamma xi (1 - boundary_t) A_{t+1}
//! R_t     = A_t + V(s_t)
//! ```
//!
//! Nominal GAE uses `B_t = V(s_{t+1})`; the worst-case variant uses the
//! solver's value at `s_{t+1}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wcve::{Solver, UncertaintySet, ValueFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Observation as seen by the networks.
    pub obs: Vec<f64>,
    /// Raw policy sample, before scaling and clipping.
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
    pub boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaeParams {
    pub gamma: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    pub advantages: Vec<f64>,
    pub rewards_to_go: Vec<f64>,
    /// Worst-case successor states chosen by the solver, `None` for
    /// terminal transitions.
    pub worst_states: Vec<Option<Vec<f64>>>,
}

impl RolloutBuffer {
    pub fn new(transitions: Vec<Transition>) -> Self {
        RolloutBuffer {
            transitions,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageEstimate {
    pub advantages: Vec<f64>,
    pub rewards_to_go: Vec<f64>,
    pub td_errors: Vec<f64>,
    pub worst_states: Vec<Option<Vec<f64>>>,
    /// Successor states where the solver failed and `V(s_{t+1})` was used.
    pub fallbacks: usize,
}

/// Backward recursion over TD errors, restarting after each boundary.
pub fn gae_recursion(td_errors: &[f64], boundaries: &[bool], gamma: f64, xi: f64) -> Vec<f64> {
    assert_eq!(td_errors.len(), boundaries.len());
    let mut adv = vec![0.0; td_errors.len()];
    let mut running = 0.0;
    for t in (0..td_errors.len()).rev() {
        if boundaries[t] {
            running = 0.0;
        }
        running = td_errors[t] + gamma * xi * running;
        adv[t] = running;
    }
    adv
}

fn check(buffer: &RolloutBuffer, params: &GaeParams) -> Result<()> {
    if buffer.is_empty() {
        return Err(Error::InvalidInput("rollout buffer is empty".into()));
    }
    if !(params.gamma > 0.0 && params.gamma < 1.0 && params.xi >= 0.0 && params.xi < 1.0) {
        return Err(Error::InvalidInput(format!(
            "need gamma in (0,1) and xi in [0,1), got {} and {}",
            params.gamma, params.xi
        )));
    }
    if !buffer.transitions.last().unwrap().boundary {
        return Err(Error::InvalidInput(
            "the last transition must close its segment".into(),
        ));
    }
    Ok(())
}

pub fn compute_gae<V: ValueFunction + ?Sized>(
    buffer: &RolloutBuffer,
    critic: &V,
    params: &GaeParams,
) -> Result<AdvantageEstimate> {
    compute_worst_case_gae(buffer, critic, Solver::Identity, &UncertaintySet::new(0.0), params)
}

/// GAE with each non-terminal bootstrap `V(s_{t+1})` replaced by the
/// solver's worst value over the uncertainty set around `s_{t+1}`.
pub fn compute_worst_case_gae<V: ValueFunction + ?Sized>(
    buffer: &RolloutBuffer,
    critic: &V,
    solver: Solver,
    set: &UncertaintySet,
    params: &GaeParams,
) -> Result<AdvantageEstimate> {
    check(buffer, params)?;
    let dim = critic.input_dim();
    for t in &buffer.transitions {
        if t.obs.len() != dim || t.next_obs.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: if t.obs.len() != dim {
                    t.obs.len()
                } else {
                    t.next_obs.len()
                },
            });
        }
    }
    set.validate(dim)?;

    let per_step: Vec<(f64, f64, Option<Vec<f64>>, bool)> = buffer
        .transitions
        .par_iter()
        .map(|t| -> Result<_> {
            let v_now = critic.value(&t.obs);
            if t.terminal {
                return Ok((v_now, 0.0, None, false));
            }
            let sol = solver.solve(critic, &t.next_obs, set)?;
            if sol.fell_back {
                Ok((v_now, critic.value(&t.next_obs), None, true))
            } else {
                Ok((v_now, sol.worst_value, Some(sol.worst_state), false))
            }
        })
        .collect::<Result<_>>()?;

    let td_errors: Vec<f64> = buffer
        .transitions
        .iter()
        .zip(&per_step)
        .map(|(t, (v_now, boot, _, _))| t.reward + params.gamma * boot - v_now)
        .collect();
    let boundaries: Vec<bool> = buffer.transitions.iter().map(|t| t.boundary).collect();
    let advantages = gae_recursion(&td_errors, &boundaries, params.gamma, params.xi);
    if let Some(i) = advantages.iter().position(|a| !a.is_finite()) {
        return Err(Error::Divergence(format!("non-finite advantage at {i}")));
    }
    let rewards_to_go = advantages
        .iter()
        .zip(&per_step)
        .map(|(a, (v, ..))| a + v)
        .collect();
    let fallbacks = per_step.iter().filter(|p| p.3).count();
    Ok(AdvantageEstimate {
        advantages,
        rewards_to_go,
        td_errors,
        worst_states: per_step.into_iter().map(|p| p.2).collect(),
        fallbacks,
    })
}

/// Zero mean, unit variance (population), in place.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.len() < 2 {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    for a in adv.iter_mut() {
        *a = (*a - mean) / std;
    }
}
