//! Trains one of the four variants on cart-pole and prints the learning curve.
//!
//! ```text
//! cargo run --release --example train_cartpole -- [variant] [epsilon] [lambda] [seed] [total_transitions]
//! cargo run --release --example train_cartpole -- ppo-pgdlc 0.003 0.001 0
//! ```

use robustrl::envs::{Env, EnvKind};
use robustrl::ppo::{train, TrainConfig, Variant};

fn main() -> robustrl::Result<()> {
    let mut args = std::env::args().skip(1);
    let variant: Variant = args.next().map_or(Variant::Ppo, |s| {
        serde_json::from_value(serde_json::Value::String(s)).expect("variant")
    });
    let epsilon = args.next().map_or(0.0, |s| s.parse().expect("epsilon"));
    let lambda = args.next().map_or(0.0, |s| s.parse().expect("lambda"));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));
    let total = args.next().map_or(300_000, |s| s.parse().expect("transitions"));
    let env = Env::nominal(EnvKind::CartPole);
    let config = TrainConfig {
        seed,
        total_transitions: total,
        record_wall_time: true,
        ..TrainConfig::for_variant(variant, epsilon, lambda)
    };
    let out = train(&env, &config)?;
    for row in &out.log {
        println!(
            "iter {:4}  transitions {:7}  return {:7.1}  critic {:9.3}  |dV|_1 {:7.3}  t {:6.1}s",
            row.iteration, row.transitions, row.mean_return, row.critic_pred_loss, row.mean_grad_norm_1, row.wall_time_s
        );
    }
    Ok(())
}
