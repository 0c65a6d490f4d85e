//! The training loop.
//!
//! Each iteration collects `num_envs * steps_per_env` transitions with the
//! current stochastic policy, computes (worst-case) advantages against the
//! critic as it stood before the update, then runs `epochs` passes of
//! shuffled minibatches, taking one Adam step on the actor and one on the
//! critic per minibatch.
//!
//! Every random draw comes from a stream derived from `config.seed`, and
//! per-instance results are merged in instance order, so the outcome does
//! not depend on the number of worker threads.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diffcore::{clip_grad_norm, AdamState, Mlp};
use crate::envs::{Env, EnvState, Environment};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::rng::{stream_rng, RngState, SeedStream};

use super::buffer::{compute_worst_case_gae, normalize_advantages, GaeParams, RolloutBuffer, Transition};
use super::checkpoint::{Agent, PolicyCheckpoint, POLICY_FORMAT_VERSION};
use super::config::{TrainConfig, Variant};
use super::loss::{actor_loss, critic_loss, ActorSample};
use super::normalizer::ObsNormalizer;
use super::policy::GaussianPolicy;

pub const LOG_HEADER: &str = "iteration,transitions,mean_return,actor_loss,critic_pred_loss,critic_lips_loss,mean_grad_norm_1,pgd_fallbacks,wall_time_s";

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub iteration: usize,
    pub transitions: usize,
    /// Mean return of the episodes finished during the iteration; carries
    /// the previous value forward when none finished (NaN before the first).
    pub mean_return: f64,
    pub actor_loss: f64,
    pub critic_pred_loss: f64,
    pub critic_lips_loss: f64,
    /// Mean `||grad_s V(s)||_1` over the rollout states.
    pub mean_grad_norm_1: f64,
    pub pgd_fallbacks: usize,
    pub wall_time_s: f64,
}

impl LogRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.transitions,
            self.mean_return,
            self.actor_loss,
            self.critic_pred_loss,
            self.critic_lips_loss,
            self.mean_grad_norm_1,
            self.pgd_fallbacks,
            self.wall_time_s
        )
    }
}

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Worker threads for rollouts and worst-case estimation. 0 means 1.
    pub workers: usize,
    /// Directory for periodic, final and last-good checkpoints.
    pub checkpoint_dir: Option<PathBuf>,
    /// Training log, rewritten atomically after every iteration.
    pub log_path: Option<PathBuf>,
    pub variant: Option<Variant>,
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: Agent,
    pub log: Vec<LogRow>,
    pub checkpoint: PolicyCheckpoint,
}

struct Instance {
    state: EnvState,
    episode_return: f64,
    reset_rng: ChaCha8Rng,
    action_rng: ChaCha8Rng,
}

struct Segment {
    transitions: Vec<Transition>,
    raw_obs: Vec<Vec<f64>>,
    finished_returns: Vec<f64>,
}

struct Learner {
    policy: GaussianPolicy,
    critic: Mlp,
    normalizer: Option<ObsNormalizer>,
    actor_opt: AdamState,
    critic_opt: AdamState,
}

fn collect_segment(
    env: &Env,
    learner: &Learner,
    inst: &mut Instance,
    steps: usize,
) -> Result<Segment> {
    let bound = env.action_bound();
    let norm = |raw: &[f64]| match &learner.normalizer {
        Some(n) => n.normalize(raw),
        None => raw.to_vec(),
    };
    let mut seg = Segment {
        transitions: Vec::with_capacity(steps),
        raw_obs: Vec::with_capacity(steps),
        finished_returns: Vec::new(),
    };
    for k in 0..steps {
        let raw = env.observe(&inst.state);
        let obs = norm(&raw);
        let (action, log_prob) = learner.policy.sample(&obs, &mut inst.action_rng)?;
        let scaled: Vec<f64> = action.iter().map(|a| a * bound).collect();
        let res = env.step(&inst.state, &scaled)?;
        let next_obs = norm(&env.observe(&res.state));
        inst.episode_return += res.reward;
        let done = res.done();
        seg.transitions.push(Transition {
            obs,
            action,
            log_prob,
            reward: res.reward,
            next_obs,
            terminal: res.terminated,
            boundary: done || k + 1 == steps,
        });
        seg.raw_obs.push(raw);
        if done {
            seg.finished_returns.push(inst.episode_return);
            inst.episode_return = 0.0;
            inst.state = env.reset(inst.reset_rng.random());
        } else {
            inst.state = res.state;
        }
    }
    Ok(seg)
}

fn snapshot(
    env: &Env,
    config: &TrainConfig,
    options: &TrainOptions,
    learner: &Learner,
    instances: &[Instance],
    shuffle_rng: &ChaCha8Rng,
    iteration: usize,
    transitions: usize,
) -> PolicyCheckpoint {
    let mut rng_states: Vec<RngState> = instances
        .iter()
        .map(|i| RngState::capture(&i.action_rng))
        .collect();
    rng_states.push(RngState::capture(shuffle_rng));
    PolicyCheckpoint {
        format_version: POLICY_FORMAT_VERSION,
        library_version: PolicyCheckpoint::library_version(),
        variant: options.variant,
        solver: config.solver,
        epsilon: config.uncertainty.epsilon,
        lambda_lips: config.lambda_lips,
        seed: config.seed,
        iteration,
        transitions,
        config_hash: options.config_hash.clone(),
        env: env.clone(),
        policy: learner.policy.clone(),
        critic: learner.critic.clone(),
        normalizer: learner.normalizer.clone(),
        actor_optimizer: learner.actor_opt.clone(),
        critic_optimizer: learner.critic_opt.clone(),
        rng_states,
    }
}

fn save_in(dir: &Option<PathBuf>, name: &str, ck: &PolicyCheckpoint) -> Result<()> {
    if let Some(d) = dir {
        ck.save(&d.join(name))?;
    }
    Ok(())
}

pub fn train(env: &Env, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(env, config, &TrainOptions::default())
}

pub fn train_with(env: &Env, config: &TrainConfig, options: &TrainOptions) -> Result<TrainOutcome> {
    config.validate()?;
    let obs_dim = env.obs_dim();
    config.uncertainty.validate(obs_dim)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(|| run(env, config, options))
}

fn run(env: &Env, config: &TrainConfig, options: &TrainOptions) -> Result<TrainOutcome> {
    let started = Instant::now();
    let obs_dim = env.obs_dim();
    let mut init_rng = stream_rng(config.seed, SeedStream::Init, 0);
    let policy = GaussianPolicy::new(
        obs_dim,
        env.action_dim(),
        &config.hidden_sizes,
        config.actor_activation,
        config.init_log_std,
        &mut init_rng,
    )?;
    let mut critic_sizes = vec![obs_dim];
    critic_sizes.extend_from_slice(&config.hidden_sizes);
    critic_sizes.push(1);
    let critic = Mlp::new(critic_sizes, config.critic_activation, &mut init_rng)?;
    let mut learner = Learner {
        actor_opt: AdamState::new(policy.num_params(), config.actor_lr),
        critic_opt: AdamState::new(critic.num_params(), config.critic_lr),
        policy,
        critic,
        normalizer: config.normalize_obs.then(|| ObsNormalizer::new(obs_dim)),
    };

    let mut instances: Vec<Instance> = (0..config.num_envs as u64)
        .map(|i| {
            let mut reset_rng = stream_rng(config.seed, SeedStream::Env, i);
            let state = env.reset(reset_rng.random());
            Instance {
                state,
                episode_return: 0.0,
                reset_rng,
                action_rng: stream_rng(config.seed, SeedStream::Rollout, i),
            }
        })
        .collect();
    let mut shuffle_rng = stream_rng(config.seed, SeedStream::Rollout, u64::MAX);
    let gae = GaeParams {
        gamma: config.gamma,
        xi: config.xi,
    };

    let mut log = Vec::new();
    let mut transitions = 0usize;
    let mut last_return = f64::NAN;
    let mut last_good = snapshot(env, config, options, &learner, &instances, &shuffle_rng, 0, 0);

    let abort = |err: Error, last_good: &PolicyCheckpoint| -> Error {
        match save_in(&options.checkpoint_dir, "last_good.ckpt", last_good) {
            Ok(()) => err,
            Err(save_err) => Error::Divergence(format!("{err}; saving last good state failed: {save_err}")),
        }
    };

    for iteration in 1..=config.iterations() {
        // Rollout.
        let segments: Vec<Result<Segment>> = instances
            .par_iter_mut()
            .map(|inst| collect_segment(env, &learner, inst, config.steps_per_env))
            .collect();
        let mut batch = Vec::with_capacity(config.transitions_per_iteration());
        let mut raw_obs = Vec::with_capacity(config.transitions_per_iteration());
        let mut finished = Vec::new();
        for seg in segments {
            let seg = match seg {
                Ok(s) => s,
                Err(e) => return Err(abort(e, &last_good)),
            };
            batch.extend(seg.transitions);
            raw_obs.extend(seg.raw_obs);
            finished.extend(seg.finished_returns);
        }
        transitions += batch.len();
        if !finished.is_empty() {
            last_return = finished.iter().sum::<f64>() / finished.len() as f64;
        }

        // Advantages against the pre-update critic.
        let mut buffer = RolloutBuffer::new(batch);
        let est = match compute_worst_case_gae(
            &buffer,
            &learner.critic,
            config.solver,
            &config.uncertainty,
            &gae,
        ) {
            Ok(e) => e,
            Err(e) => return Err(abort(e, &last_good)),
        };
        let grad_norms: Vec<f64> = buffer
            .transitions
            .par_iter()
            .map(|t| {
                let (_, g) = learner
                    .critic
                    .value_and_input_grad(&t.obs)
                    .expect("critic matches observation size");
                g.iter().map(|x| x.abs()).sum::<f64>()
            })
            .collect();
        let mean_grad_norm_1 = grad_norms.iter().sum::<f64>() / grad_norms.len() as f64;
        buffer.advantages = est.advantages;
        buffer.rewards_to_go = est.rewards_to_go;
        buffer.worst_states = est.worst_states;
        let mut adv = buffer.advantages.clone();
        if config.normalize_advantages {
            normalize_advantages(&mut adv);
        }
        if let Some(n) = &mut learner.normalizer {
            n.update(&raw_obs);
        }

        // Updates.
        let mut order: Vec<usize> = (0..buffer.len()).collect();
        let (mut actor_sum, mut pred_sum, mut lips_sum, mut n_batches) = (0.0, 0.0, 0.0, 0usize);
        for _ in 0..config.epochs {
            order.shuffle(&mut shuffle_rng);
            for chunk in order.chunks(config.minibatch_size) {
                let samples: Vec<ActorSample<'_>> = chunk
                    .iter()
                    .map(|&i| {
                        let t = &buffer.transitions[i];
                        ActorSample {
                            obs: &t.obs,
                            action: &t.action,
                            old_log_prob: t.log_prob,
                            advantage: adv[i],
                        }
                    })
                    .collect();
                let step = (|| -> Result<(f64, f64, f64)> {
                    let mut a = actor_loss(&samples, &learner.policy, config.eta, config.entropy_coef)?;
                    let states: Vec<&[f64]> = samples.iter().map(|s| s.obs).collect();
                    let targets: Vec<f64> = chunk.iter().map(|&i| buffer.rewards_to_go[i]).collect();
                    let mut c = critic_loss(&states, &learner.critic, &targets, config.lambda_lips)?;
                    if !a.loss.is_finite() || !c.loss.is_finite() {
                        return Err(Error::Divergence(format!(
                            "non-finite loss at iteration {iteration} (actor {}, critic {})",
                            a.loss, c.loss
                        )));
                    }
                    if let Some(max) = config.max_grad_norm {
                        clip_grad_norm(&mut a.grad, max);
                        clip_grad_norm(&mut c.grad, max);
                    }
                    let mut flat = learner.policy.flat_params();
                    learner.actor_opt.step(&mut flat, &a.grad)?;
                    learner.policy.set_flat_params(&flat)?;
                    learner.critic_opt.step(learner.critic.params_mut(), &c.grad)?;
                    Ok((a.loss, c.pred, c.lips))
                })();
                match step {
                    Ok((al, p, l)) => {
                        actor_sum += al;
                        pred_sum += p;
                        lips_sum += l;
                        n_batches += 1;
                    }
                    Err(e) => return Err(abort(e, &last_good)),
                }
            }
        }

        let nb = n_batches as f64;
        let row = LogRow {
            iteration,
            transitions,
            mean_return: last_return,
            actor_loss: actor_sum / nb,
            critic_pred_loss: pred_sum / nb,
            critic_lips_loss: lips_sum / nb,
            mean_grad_norm_1,
            pgd_fallbacks: est.fallbacks,
            wall_time_s: if config.record_wall_time {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        log.push(row);
        if let Some(p) = &options.log_path {
            write_atomic(p, log_csv(&log).as_bytes())?;
        }
        last_good = snapshot(
            env,
            config,
            options,
            &learner,
            &instances,
            &shuffle_rng,
            iteration,
            transitions,
        );
        if config.checkpoint_every > 0 && iteration % config.checkpoint_every == 0 {
            save_in(&options.checkpoint_dir, &format!("ckpt_{iteration:05}.ckpt"), &last_good)?;
        }
    }

    save_in(&options.checkpoint_dir, "final.ckpt", &last_good)?;
    Ok(TrainOutcome {
        agent: last_good.agent(),
        log,
        checkpoint: last_good,
    })
}

/// Parses a training log written by [`log_csv`].
pub fn read_log(path: &Path) -> Result<Vec<LogRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(LOG_HEADER) {
        return Err(Error::format(path, "unexpected log header"));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(Error::format(path, format!("bad row `{line}`")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::format(path, e));
            let int = |s: &str| s.parse::<usize>().map_err(|e| Error::format(path, e));
            Ok(LogRow {
                iteration: int(f[0])?,
                transitions: int(f[1])?,
                mean_return: num(f[2])?,
                actor_loss: num(f[3])?,
                critic_pred_loss: num(f[4])?,
                critic_lips_loss: num(f[5])?,
                mean_grad_norm_1: num(f[6])?,
                pgd_fallbacks: int(f[7])?,
                wall_time_s: num(f[8])?,
            })
        })
        .collect()
}
