//! Actor and critic losses together with their parameter gradients.

use crate::diffcore::Mlp;
use crate::error::{Error, Result};

use super::policy::{log_prob_given_mean, GaussianPolicy};

/// One sample of the actor objective.
#[derive(Debug, Clone, Copy)]
pub struct ActorSample<'a> {
    pub obs: &'a [f64],
    pub action: &'a [f64],
    /// Log-probability under the policy that collected the sample.
    pub old_log_prob: f64,
    pub advantage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorLoss {
    /// Negative mean clipped surrogate over the valid samples.
    pub loss: f64,
    /// Gradient with respect to [`GaussianPolicy::flat_params`].
    pub grad: Vec<f64>,
    /// Samples dropped because their probability ratio was not finite.
    pub skipped: usize,
    /// Fraction of valid samples whose clipped branch was active.
    pub clip_fraction: f64,
}

/// Per-sample surrogate `min(r A, clip(r, 1-eta, 1+eta) A)` and whether the
/// gradient flows through it (the unclipped branch is the minimum).
pub fn clipped_surrogate(ratio: f64, advantage: f64, eta: f64) -> (f64, bool) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eta, 1.0 + eta) * advantage;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

pub fn actor_loss(
    samples: &[ActorSample<'_>],
    policy: &GaussianPolicy,
    eta: f64,
    entropy_coef: f64,
) -> Result<ActorLoss> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty actor batch".into()));
    }
    let n_net = policy.mean_net.num_params();
    let act_dim = policy.act_dim();
    let log_std = policy.log_std();
    let mut grad = vec![0.0; policy.num_params()];
    let mut total = 0.0;
    let mut valid = 0usize;
    let mut clipped_count = 0usize;

    // First pass: per-sample coefficients, so the mean can be taken over
    // the valid samples only.
    let mut work = Vec::with_capacity(samples.len());
    for s in samples {
        let cache = policy.mean_net.forward_cached(s.obs)?;
        let mean = cache.output().to_vec();
        let logp = log_prob_given_mean(&mean, &log_std, s.action);
        let ratio = (logp - s.old_log_prob).exp();
        if !ratio.is_finite() || !s.advantage.is_finite() {
            continue;
        }
        let (surr, active) = clipped_surrogate(ratio, s.advantage, eta);
        total += surr;
        valid += 1;
        if !active {
            clipped_count += 1;
        }
        work.push((cache, mean, s.action, if active { ratio * s.advantage } else { 0.0 }));
    }
    if valid == 0 {
        return Err(Error::Divergence(
            "no sample in the batch has a finite probability ratio".into(),
        ));
    }
    let scale = -1.0 / valid as f64;
    let mut seed = vec![0.0; act_dim];
    for (cache, mean, action, coeff) in &work {
        if *coeff == 0.0 {
            continue;
        }
        // d logp / d mean_j = (a_j - mu_j) / sigma_j^2
        // d logp / d log_std_j = (a_j - mu_j)^2 / sigma_j^2 - 1
        for j in 0..act_dim {
            let var = (2.0 * log_std[j]).exp();
            let d = action[j] - mean[j];
            seed[j] = scale * coeff * d / var;
            grad[n_net + j] += scale * coeff * (d * d / var - 1.0);
        }
        policy.mean_net.backward(cache, &seed, &mut grad[..n_net]);
    }
    let mut loss = -total / valid as f64;
    if entropy_coef != 0.0 {
        // entropy of a diagonal Gaussian: sum(log_std) + const
        loss -= entropy_coef * log_std.iter().sum::<f64>();
        for j in 0..act_dim {
            grad[n_net + j] -= entropy_coef;
        }
    }
    Ok(ActorLoss {
        loss,
        grad,
        skipped: samples.len() - valid,
        clip_fraction: clipped_count as f64 / valid as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticLoss {
    /// `pred + lambda * lips`.
    pub loss: f64,
    /// Mean of `0.5 (V(s) - R)^2`.
    pub pred: f64,
    /// Mean of `||grad_s V(s)||_1^2`, unweighted. Zero when not computed.
    pub lips: f64,
    pub grad: Vec<f64>,
}

/// Regression loss on rewards-to-go plus `lambda_lips` times the mean
/// squared 1-norm of the critic's input gradient. The penalty is only
/// evaluated when `lambda_lips > 0`.
pub fn critic_loss(
    states: &[&[f64]],
    critic: &Mlp,
    rewards_to_go: &[f64],
    lambda_lips: f64,
) -> Result<CriticLoss> {
    if states.is_empty() {
        return Err(Error::InvalidInput("empty critic batch".into()));
    }
    if states.len() != rewards_to_go.len() {
        return Err(Error::DimensionMismatch {
            expected: states.len(),
            got: rewards_to_go.len(),
        });
    }
    if !(lambda_lips >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda_lips must be non-negative, got {lambda_lips}"
        )));
    }
    let n = states.len() as f64;
    let mut grad = vec![0.0; critic.num_params()];
    let mut pred = 0.0;
    let mut lips = 0.0;
    for (s, &target) in states.iter().zip(rewards_to_go) {
        let cache = critic.forward_cached(s)?;
        let err = cache.output()[0] - target;
        pred += 0.5 * err * err;
        critic.backward(&cache, &[err / n], &mut grad);
        if lambda_lips > 0.0 {
            let (p, _) = critic.penalty_backward(&cache, lambda_lips / n, &mut grad)?;
            lips += p;
        }
    }
    pred /= n;
    lips /= n;
    Ok(CriticLoss {
        loss: pred + lambda_lips * lips,
        pred,
        lips,
        grad,
    })
}
