//! PPO and its robust variants.
//!
//! | variant     | worst-case solver | critic penalty |
//! |-------------|-------------------|----------------|
//! | `ppo`       | identity          | 0              |
//! | `ppo-gbr`   | first-order (GBR) | 0              |
//! | `ppo-pgd`   | PGD               | 0              |
//! | `ppo-pgdlc` | PGD               | `lambda_lips`  |

mod buffer;
mod checkpoint;
mod config;
mod loss;
mod normalizer;
mod policy;
mod train;

pub use buffer::{
    compute_gae, compute_worst_case_gae, gae_recursion, normalize_advantages, AdvantageEstimate,
    GaeParams, RolloutBuffer, Transition,
};
pub use checkpoint::{Agent, PolicyCheckpoint, POLICY_FORMAT_VERSION};
pub use config::{TrainConfig, Variant};
pub use loss::{actor_loss, clipped_surrogate, critic_loss, ActorLoss, ActorSample, CriticLoss};
pub use normalizer::ObsNormalizer;
pub use policy::{log_prob_given_mean, GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
pub use train::{log_csv, read_log, train, train_with, LogRow, TrainOptions, TrainOutcome, LOG_HEADER};
