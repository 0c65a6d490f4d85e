use serde::{Deserialize, Serialize};

use crate::diffcore::Activation;
use crate::error::{Error, Result};
use crate::wcve::{Solver, UncertaintySet};

/// The four algorithms compared by the library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "ppo")]
    Ppo,
    #[serde(rename = "ppo-gbr")]
    PpoGbr,
    #[serde(rename = "ppo-pgd")]
    PpoPgd,
    #[serde(rename = "ppo-pgdlc")]
    PpoPgdlc,
}

impl Variant {
    pub fn solver(self) -> Solver {
        match self {
            Variant::Ppo => Solver::Identity,
            Variant::PpoGbr => Solver::Gbr,
            Variant::PpoPgd | Variant::PpoPgdlc => Solver::Pgd,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Ppo => "ppo",
            Variant::PpoGbr => "ppo-gbr",
            Variant::PpoPgd => "ppo-pgd",
            Variant::PpoPgdlc => "ppo-pgdlc",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Training hyperparameters. `solver = identity` with `lambda_lips = 0`
/// is plain PPO.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Discount factor.
    pub gamma: f64,
    /// GAE weighting.
    pub xi: f64,
    /// PPO clip ratio.
    pub eta: f64,
    /// Weight of the critic gradient-norm penalty.
    pub lambda_lips: f64,
    pub solver: Solver,
    pub uncertainty: UncertaintySet,

    pub epochs: usize,
    pub minibatch_size: usize,
    pub total_transitions: usize,
    /// Parallel environment instances, each with its own random stream.
    pub num_envs: usize,
    /// Steps collected per instance per iteration.
    pub steps_per_env: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub hidden_sizes: Vec<usize>,
    pub actor_activation: Activation,
    pub critic_activation: Activation,
    pub init_log_std: f64,
    pub normalize_advantages: bool,
    pub normalize_obs: bool,
    /// Global gradient-norm clip per network; `None` disables it.
    pub max_grad_norm: Option<f64>,
    pub entropy_coef: f64,
    /// Write a checkpoint every this many iterations; 0 keeps only the final one.
    pub checkpoint_every: usize,
    /// Fill `wall_time_s` in the training log. Off by default so that logs
    /// are byte-reproducible.
    pub record_wall_time: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            xi: 0.95,
            eta: 0.2,
            lambda_lips: 0.0,
            solver: Solver::Identity,
            uncertainty: UncertaintySet::new(0.0),
            epochs: 10,
            minibatch_size: 64,
            total_transitions: 300_000,
            num_envs: 8,
            steps_per_env: 256,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            hidden_sizes: vec![64, 64],
            actor_activation: Activation::Tanh,
            critic_activation: Activation::Tanh,
            init_log_std: 0.0,
            normalize_advantages: true,
            normalize_obs: false,
            max_grad_norm: Some(0.5),
            entropy_coef: 0.0,
            checkpoint_every: 0,
            record_wall_time: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn for_variant(variant: Variant, epsilon: f64, lambda_lips: f64) -> Self {
        TrainConfig {
            solver: variant.solver(),
            uncertainty: UncertaintySet::new(epsilon),
            lambda_lips,
            ..Default::default()
        }
    }

    pub fn transitions_per_iteration(&self) -> usize {
        self.num_envs * self.steps_per_env
    }

    pub fn iterations(&self) -> usize {
        self.total_transitions.div_ceil(self.transitions_per_iteration())
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must lie in (0,1), got {v}")))
            }
        };
        unit("gamma", self.gamma)?;
        unit("xi", self.xi)?;
        unit("eta", self.eta)?;
        if !(self.lambda_lips >= 0.0 && self.lambda_lips.is_finite()) {
            return Err(Error::InvalidInput("lambda_lips must be >= 0".into()));
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("minibatch_size", self.minibatch_size),
            ("total_transitions", self.total_transitions),
            ("num_envs", self.num_envs),
            ("steps_per_env", self.steps_per_env),
        ] {
            if v == 0 {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be >= 0")));
            }
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::InvalidInput("hidden sizes must be positive".into()));
        }
        if let Some(c) = self.max_grad_norm {
            if !(c > 0.0) {
                return Err(Error::InvalidInput("max_grad_norm must be positive".into()));
            }
        }
        if self.uncertainty.epsilon < 0.0 || !self.uncertainty.epsilon.is_finite() {
            return Err(Error::InvalidInput("epsilon must be >= 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_serde_names() {
        let v: Variant = serde_json::from_str("\"ppo-pgdlc\"").unwrap();
        assert_eq!(v, Variant::PpoPgdlc);
        assert_eq!(v.solver(), Solver::Pgd);
        assert_eq!(Variant::PpoGbr.to_string(), "ppo-gbr");
    }

    #[test]
    fn iteration_count_rounds_up() {
        let c = TrainConfig {
            total_transitions: 5000,
            num_envs: 4,
            steps_per_env: 256,
            ..Default::default()
        };
        assert_eq!(c.iterations(), 5);
    }

    #[test]
    fn validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { gamma: 1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
    }
}
