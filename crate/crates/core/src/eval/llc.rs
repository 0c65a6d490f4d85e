//! Empirical local Lipschitz constants of networks under L∞ input
//! perturbations.
//!
//! The estimate is a lower bound on the true local constant: it is the
//! larger of the best sampled difference quotient and the largest
//! `L∞ → L∞` operator norm of the Jacobian (maximum row 1-norm) seen at the
//! states and probe points.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::Mlp;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, SeedStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkTag {
    Actor,
    Critic,
}

impl NetworkTag {
    pub fn name(self) -> &'static str {
        match self {
            NetworkTag::Actor => "actor",
            NetworkTag::Critic => "critic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlcEstimate {
    pub network: NetworkTag,
    pub epsilon_probe: f64,
    /// `max(sampled, gradient_bound)`.
    pub estimate: f64,
    /// Largest `||f(s + d) - f(s)||_inf / ||d||_inf` over the probes.
    pub sampled: f64,
    /// Largest Jacobian row 1-norm over states and probe points.
    pub gradient_bound: f64,
    pub n_states: usize,
    pub n_probes: usize,
}

fn inf_norm(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

fn jacobian_bound(net: &Mlp, x: &[f64]) -> Result<f64> {
    Ok(net
        .input_jacobian(x)?
        .iter()
        .map(|row| row.iter().map(|g| g.abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// Probes are vertices of the L∞ ball of radius `epsilon_probe` (random
/// signs), drawn from a stream per state so that a run with more probes
/// extends the probe set of a run with fewer.
pub fn estimate_llc(
    net: &Mlp,
    tag: NetworkTag,
    states: &[Vec<f64>],
    epsilon_probe: f64,
    n_probes: usize,
    seed: u64,
) -> Result<LlcEstimate> {
    if states.is_empty() {
        return Err(Error::InvalidInput("no states to probe".into()));
    }
    if !(epsilon_probe > 0.0 && epsilon_probe.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "epsilon_probe must be positive, got {epsilon_probe}"
        )));
    }
    let mut sampled = 0.0f64;
    let mut gradient_bound = 0.0f64;
    let mut probe = vec![0.0; net.input_dim()];
    for (k, s) in states.iter().enumerate() {
        let base = net.forward(s)?;
        gradient_bound = gradient_bound.max(jacobian_bound(net, s)?);
        let mut rng = stream_rng(seed, SeedStream::Eval, k as u64);
        for _ in 0..n_probes {
            for (p, x) in probe.iter_mut().zip(s) {
                *p = if rng.random::<bool>() { x + epsilon_probe } else { x - epsilon_probe };
            }
            let out = net.forward(&probe)?;
            let delta = inf_norm(out.iter().zip(&base).map(|(a, b)| a - b));
            sampled = sampled.max(delta / epsilon_probe);
            gradient_bound = gradient_bound.max(jacobian_bound(net, &probe)?);
        }
    }
    Ok(LlcEstimate {
        network: tag,
        epsilon_probe,
        estimate: sampled.max(gradient_bound),
        sampled,
        gradient_bound,
        n_states: states.len(),
        n_probes,
    })
}
