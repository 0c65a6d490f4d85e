//! Action-smoothness and tracking metrics.

use serde::{Deserialize, Serialize};

use crate::envs::{run_episode, Environment};
use crate::error::{Error, Result};
use crate::ppo::Agent;
use crate::rng::{derive_seed, SeedStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    /// Mean 1-norm of first differences of the actions.
    pub action_smoothness: f64,
    /// Mean 1-norm of second differences of the actions.
    pub second_order_fluctuation: f64,
    /// Mean tracking error, when the environment defines a target.
    pub tracking_error: Option<f64>,
}

fn l1_diff<'a>(terms: impl Iterator<Item = f64> + 'a) -> f64 {
    terms.map(f64::abs).sum()
}

/// Computes AS and SFR from an action trace and TRK from per-step tracking
/// errors. Each mean is taken over the number of differences, so a unit
/// ramp has AS = 1 whatever its length.
pub fn smoothness(actions: &[Vec<f64>], tracking: Option<&[f64]>) -> Result<SmoothnessReport> {
    if actions.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "smoothness needs at least 3 actions, got {}",
            actions.len()
        )));
    }
    let dim = actions[0].len();
    if let Some(bad) = actions.iter().find(|a| a.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let first: f64 = actions
        .windows(2)
        .map(|w| l1_diff(w[1].iter().zip(&w[0]).map(|(a, b)| a - b)))
        .sum();
    let second: f64 = actions
        .windows(3)
        .map(|w| l1_diff((0..dim).map(|k| w[2][k] - 2.0 * w[1][k] + w[0][k])))
        .sum();
    let tracking_error = match tracking {
        Some([]) => return Err(Error::InvalidInput("empty tracking trace".into())),
        Some(t) => Some(t.iter().map(|e| e.abs()).sum::<f64>() / t.len() as f64),
        None => None,
    };
    Ok(SmoothnessReport {
        action_smoothness: first / (actions.len() - 1) as f64,
        second_order_fluctuation: second / (actions.len() - 2) as f64,
        tracking_error,
    })
}

/// One nominal-environment episode under the mean action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub seed: u64,
    pub total_reward: f64,
    pub length: usize,
    pub diverged: bool,
    /// `None` for episodes shorter than three steps.
    pub smoothness: Option<SmoothnessReport>,
}

/// Runs `n_episodes` deterministic episodes of `agent` in its own
/// environment and summarizes each one.
pub fn evaluate_episodes(agent: &Agent, n_episodes: usize, eval_seed: u64) -> Result<Vec<EpisodeSummary>> {
    if n_episodes == 0 {
        return Err(Error::InvalidInput("n_episodes must be positive".into()));
    }
    (0..n_episodes)
        .map(|k| {
            let seed = derive_seed(eval_seed, SeedStream::Eval, k as u64);
            let ep = run_episode(&agent.env, seed, |obs| agent.act_deterministic(obs))?;
            let smooth = if ep.action_trace.len() >= 3 {
                Some(smoothness(&ep.action_trace, ep.tracking_trace.as_deref())?)
            } else {
                None
            };
            Ok(EpisodeSummary {
                episode: k,
                seed,
                total_reward: ep.total_reward,
                length: ep.length,
                diverged: ep.diverged,
                smoothness: smooth,
            })
        })
        .collect()
}

/// Raw observations visited by the agent's mean action, starting from
/// evaluation-stream resets, until `n_states` are collected.
pub fn collect_states(agent: &Agent, n_states: usize, eval_seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut states = Vec::with_capacity(n_states);
    let mut k = 0u64;
    while states.len() < n_states {
        let seed = derive_seed(eval_seed, SeedStream::Eval, k);
        let mut state = agent.env.reset(seed);
        loop {
            let obs = agent.env.observe(&state);
            states.push(obs.clone());
            if states.len() == n_states {
                break;
            }
            let step = agent.env.step(&state, &agent.act_deterministic(&obs)?)?;
            if step.done() {
                break;
            }
            state = step.state;
        }
        k += 1;
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: impl IntoIterator<Item = f64>) -> Vec<Vec<f64>> {
        v.into_iter().map(|x| vec![x]).collect()
    }

    #[test]
    fn constant_ramp_alternating() {
        let c = smoothness(&scalar([0.7; 10]), None).unwrap();
        assert_eq!((c.action_smoothness, c.second_order_fluctuation), (0.0, 0.0));
        let r = smoothness(&scalar((0..10).map(f64::from)), None).unwrap();
        assert_eq!((r.action_smoothness, r.second_order_fluctuation), (1.0, 0.0));
        let a = smoothness(&scalar((0..10).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 })), None).unwrap();
        assert_eq!((a.action_smoothness, a.second_order_fluctuation), (2.0, 4.0));
        assert_eq!(a.tracking_error, None);
    }

    #[test]
    fn short_traces_are_rejected() {
        assert!(smoothness(&scalar([1.0, 2.0]), None).is_err());
        assert!(smoothness(&[vec![1.0], vec![1.0, 2.0], vec![0.0]], None).is_err());
    }

    #[test]
    fn tracking_mean() {
        let r = smoothness(&scalar([0.0; 4]), Some(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(r.tracking_error, Some(2.0));
    }
}
