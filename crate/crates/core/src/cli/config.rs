//! Run configuration files.
//!
//! ```toml
//! [env]
//! name = "cartpole"
//!
//! [algorithm]
//! variant = "ppo-pgdlc"
//! epsilon = 0.003
//! lambda_lips = 0.001
//!
//! [train]
//! total_transitions = 300000
//!
//! [grid]
//! size = 11
//!
//! [output]
//! dir = "runs/cartpole-pgdlc"
//! seeds = [0, 1, 2, 3]
//! ```
//!
//! Every section is optional and unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::diffcore::Activation;
use crate::envs::{Env, EnvKind, Environment};
use crate::error::{Error, Result};
use crate::eval::{GridParam, NetworkTag, PerturbationGrid};
use crate::io::sha256_hex;
use crate::ppo::{TrainConfig, Variant};
use crate::wcve::UncertaintySet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub name: EnvKind,
    pub mass_scale: f64,
    pub damping_scale: f64,
    /// Defaults to the environment's nominal value.
    pub gravity: Option<f64>,
    pub timestep: Option<f64>,
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection {
            name: EnvKind::CartPole,
            mass_scale: 1.0,
            damping_scale: 1.0,
            gravity: None,
            timestep: None,
        }
    }
}

impl EnvSection {
    pub fn build(&self) -> Result<Env> {
        let env = Env::nominal(self.name);
        let mut p = env.params();
        p.mass_scale = self.mass_scale;
        p.damping_scale = self.damping_scale;
        if let Some(g) = self.gravity {
            p.gravity = g;
        }
        if let Some(dt) = self.timestep {
            p.timestep = dt;
        }
        env.with_params(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmSection {
    pub variant: Variant,
    pub epsilon: f64,
    pub lambda_lips: f64,
    pub pgd_steps: usize,
    pub pgd_step_size: Option<f64>,
    pub strict_alg1: bool,
    pub mask: Option<Vec<bool>>,
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        AlgorithmSection {
            variant: Variant::Ppo,
            epsilon: 0.0,
            lambda_lips: 0.0,
            pgd_steps: 10,
            pgd_step_size: None,
            strict_alg1: false,
            mask: None,
        }
    }
}

/// Hyperparameters that do not depend on the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub gamma: f64,
    pub xi: f64,
    pub eta: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub total_transitions: usize,
    pub num_envs: usize,
    pub steps_per_env: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub hidden_sizes: Vec<usize>,
    pub actor_activation: Activation,
    pub critic_activation: Activation,
    pub init_log_std: f64,
    pub normalize_advantages: bool,
    pub normalize_obs: bool,
    pub max_grad_norm: Option<f64>,
    pub entropy_coef: f64,
    pub checkpoint_every: usize,
    pub record_wall_time: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            gamma: d.gamma,
            xi: d.xi,
            eta: d.eta,
            epochs: d.epochs,
            minibatch_size: d.minibatch_size,
            total_transitions: d.total_transitions,
            num_envs: d.num_envs,
            steps_per_env: d.steps_per_env,
            actor_lr: d.actor_lr,
            critic_lr: d.critic_lr,
            hidden_sizes: d.hidden_sizes,
            actor_activation: d.actor_activation,
            critic_activation: d.critic_activation,
            init_log_std: d.init_log_std,
            normalize_advantages: d.normalize_advantages,
            normalize_obs: d.normalize_obs,
            max_grad_norm: d.max_grad_norm,
            entropy_coef: d.entropy_coef,
            checkpoint_every: d.checkpoint_every,
            record_wall_time: d.record_wall_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub size: usize,
    pub axis1: GridParam,
    pub axis2: GridParam,
    pub scale_min: f64,
    pub scale_max: f64,
    pub episodes_per_cell: usize,
    pub seed: u64,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = PerturbationGrid::default();
        GridSection {
            size: g.size,
            axis1: g.axis1,
            axis2: g.axis2,
            scale_min: g.scale_min,
            scale_max: g.scale_max,
            episodes_per_cell: g.episodes_per_cell,
            seed: 0,
        }
    }
}

impl GridSection {
    pub fn grid(&self) -> PerturbationGrid {
        PerturbationGrid {
            size: self.size,
            axis1: self.axis1,
            axis2: self.axis2,
            scale_min: self.scale_min,
            scale_max: self.scale_max,
            episodes_per_cell: self.episodes_per_cell,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub n_episodes: usize,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            n_episodes: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlcSection {
    pub epsilon_probe: f64,
    pub n_states: usize,
    pub n_probes: usize,
    pub networks: Vec<NetworkTag>,
    pub seed: u64,
}

impl Default for LlcSection {
    fn default() -> Self {
        LlcSection {
            epsilon_probe: 1e-3,
            n_states: 250,
            n_probes: 100,
            networks: vec![NetworkTag::Actor, NetworkTag::Critic],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    pub seeds: Vec<u64>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "runs/default".into(),
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvSection,
    pub algorithm: AlgorithmSection,
    pub train: TrainSection,
    pub grid: GridSection,
    pub eval: EvalSection,
    pub llc: LlcSection,
    pub output: OutputSection,
}

/// 1-based line of `key` inside `[section]`, if it appears in `text`.
pub fn locate_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some(rest) = t.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(n + 1);
                }
            }
        }
    }
    None
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    /// Parses and validates a config file's contents.
    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            Error::Config {
                key: e
                    .message()
                    .split('`')
                    .nth(1)
                    .unwrap_or("<document>")
                    .to_string(),
                line,
                message: e.message().trim().to_string(),
            }
        })?;
        config.validate().map_err(|e| match e {
            Error::Config { key, line: None, message } => {
                let (section, k) = key.split_once('.').unwrap_or(("", &key));
                Error::Config {
                    line: locate_key(text, section, k),
                    key,
                    message,
                }
            }
            other => other,
        })?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn invalid(key: &str, message: impl Into<String>) -> Error {
        Error::Config {
            key: key.into(),
            line: None,
            message: message.into(),
        }
    }

    /// Checks that the fields agree with the chosen variant, then runs the
    /// per-module validators.
    pub fn validate(&self) -> Result<()> {
        let a = &self.algorithm;
        let eps = a.epsilon;
        let lam = a.lambda_lips;
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Self::invalid("algorithm.epsilon", "must be a finite number >= 0"));
        }
        if !(lam >= 0.0 && lam.is_finite()) {
            return Err(Self::invalid("algorithm.lambda_lips", "must be a finite number >= 0"));
        }
        match a.variant {
            Variant::Ppo if eps > 0.0 => {
                return Err(Self::invalid("algorithm.epsilon", "variant ppo does not use a radius; remove it or pick a robust variant"))
            }
            Variant::Ppo | Variant::PpoGbr | Variant::PpoPgd if lam > 0.0 => {
                return Err(Self::invalid(
                    "algorithm.lambda_lips",
                    format!("variant {} trains an unregularized critic; only ppo-pgdlc accepts lambda_lips", a.variant),
                ))
            }
            Variant::PpoPgdlc if eps == 0.0 => {
                return Err(Self::invalid("algorithm.epsilon", "variant ppo-pgdlc requires epsilon > 0"))
            }
            _ => {}
        }
        if self.output.seeds.is_empty() {
            return Err(Self::invalid("output.seeds", "list at least one seed"));
        }
        if self.eval.n_episodes == 0 {
            return Err(Self::invalid("eval.n_episodes", "must be positive"));
        }
        if !(self.llc.epsilon_probe > 0.0) {
            return Err(Self::invalid("llc.epsilon_probe", "must be positive"));
        }
        if self.llc.n_states == 0 {
            return Err(Self::invalid("llc.n_states", "must be positive"));
        }
        let env = self.env.build().map_err(|e| self.module_error("env", &self.env, e))?;
        self.train_config(self.output.seeds[0])
            .validate()
            .map_err(|e| self.module_error("train", &self.train, e))?;
        self.uncertainty()
            .validate(env.obs_dim())
            .map_err(|e| self.module_error("algorithm", &self.algorithm, e))?;
        self.grid
            .grid()
            .validate()
            .map_err(|e| self.module_error("grid", &self.grid, e))
    }

    /// Rewrites a validator error as a config error, naming the field when
    /// the message starts with one of the section's keys.
    fn module_error<T: Serialize>(&self, section: &str, fields: &T, e: Error) -> Error {
        let message = match e {
            Error::InvalidInput(m) => m,
            other => other.to_string(),
        };
        let first = message
            .split(|c: char| !(c.is_alphanumeric() || c == '_'))
            .next()
            .unwrap_or("");
        let known = serde_json::to_value(fields)
            .ok()
            .and_then(|v| v.as_object().map(|o| o.contains_key(first)))
            .unwrap_or(false);
        let key = if known { format!("{section}.{first}") } else { section.to_string() };
        Self::invalid(&key, message)
    }

    pub fn uncertainty(&self) -> UncertaintySet {
        let a = &self.algorithm;
        UncertaintySet {
            epsilon: a.epsilon,
            mask: a.mask.clone(),
            pgd_steps: a.pgd_steps,
            pgd_step_size: a.pgd_step_size,
            strict_alg1: a.strict_alg1,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let t = self.train.clone();
        TrainConfig {
            gamma: t.gamma,
            xi: t.xi,
            eta: t.eta,
            lambda_lips: self.algorithm.lambda_lips,
            solver: self.algorithm.variant.solver(),
            uncertainty: self.uncertainty(),
            epochs: t.epochs,
            minibatch_size: t.minibatch_size,
            total_transitions: t.total_transitions,
            num_envs: t.num_envs,
            steps_per_env: t.steps_per_env,
            actor_lr: t.actor_lr,
            critic_lr: t.critic_lr,
            hidden_sizes: t.hidden_sizes,
            actor_activation: t.actor_activation,
            critic_activation: t.critic_activation,
            init_log_std: t.init_log_std,
            normalize_advantages: t.normalize_advantages,
            normalize_obs: t.normalize_obs,
            max_grad_norm: t.max_grad_norm,
            entropy_coef: t.entropy_coef,
            checkpoint_every: t.checkpoint_every,
            record_wall_time: t.record_wall_time,
            seed,
        }
    }

    /// SHA-256 of the canonical JSON form, after any command-line overrides.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}
