use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffcore::{check_version, AdamState, Mlp};
use crate::envs::{Env, Environment};
use crate::error::{Error, Result};
use crate::io::{write_atomic, LIBRARY_VERSION};
use crate::rng::RngState;
use crate::wcve::Solver;

use super::config::Variant;
use super::normalizer::ObsNormalizer;
use super::policy::GaussianPolicy;

pub const POLICY_FORMAT_VERSION: u32 = 1;

/// A trained actor-critic pair together with what is needed to run it.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub env: Env,
    pub policy: GaussianPolicy,
    pub critic: Mlp,
    pub normalizer: Option<ObsNormalizer>,
}

impl Agent {
    /// Observation as fed to the networks.
    pub fn network_obs(&self, raw: &[f64]) -> Vec<f64> {
        match &self.normalizer {
            Some(n) => n.normalize(raw),
            None => raw.to_vec(),
        }
    }

    /// Mean action in environment units.
    pub fn act_deterministic(&self, raw_obs: &[f64]) -> Result<Vec<f64>> {
        let bound = self.env.action_bound();
        Ok(self
            .policy
            .mean(&self.network_obs(raw_obs))?
            .into_iter()
            .map(|a| a * bound)
            .collect())
    }

    pub fn value(&self, raw_obs: &[f64]) -> Result<f64> {
        self.critic.value(&self.network_obs(raw_obs))
    }
}

/// Versioned JSON checkpoint of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyCheckpoint {
    pub format_version: u32,
    pub library_version: String,
    pub variant: Option<Variant>,
    pub solver: Solver,
    pub epsilon: f64,
    pub lambda_lips: f64,
    pub seed: u64,
    pub iteration: usize,
    pub transitions: usize,
    pub config_hash: Option<String>,
    pub env: Env,
    pub policy: GaussianPolicy,
    pub critic: Mlp,
    pub normalizer: Option<ObsNormalizer>,
    pub actor_optimizer: AdamState,
    pub critic_optimizer: AdamState,
    /// Action-sampling streams of every environment instance, then the
    /// minibatch shuffling stream.
    pub rng_states: Vec<RngState>,
}

impl PolicyCheckpoint {
    pub fn agent(&self) -> Agent {
        Agent {
            env: self.env.clone(),
            policy: self.policy.clone(),
            critic: self.critic.clone(),
            normalizer: self.normalizer.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        check_version(text, POLICY_FORMAT_VERSION)?;
        let ck: PolicyCheckpoint = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("policy checkpoint: {e}")))?;
        ck.check_shapes()?;
        Ok(ck)
    }

    fn check_shapes(&self) -> Result<()> {
        let obs = self.env.obs_dim();
        let checks = [
            (self.policy.obs_dim(), obs),
            (self.critic.input_dim(), obs),
            (self.critic.output_dim(), 1),
            (self.policy.act_dim(), self.env.action_dim()),
            (self.actor_optimizer.len(), self.policy.num_params()),
            (self.critic_optimizer.len(), self.critic.num_params()),
        ];
        for (got, expected) in checks {
            if got != expected {
                return Err(Error::DimensionMismatch { expected, got });
            }
        }
        if let Some(n) = &self.normalizer {
            if n.dim() != obs {
                return Err(Error::DimensionMismatch {
                    expected: obs,
                    got: n.dim(),
                });
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub(crate) fn library_version() -> String {
        LIBRARY_VERSION.to_string()
    }
}
