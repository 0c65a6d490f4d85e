//! Local Lipschitz constants of critics trained with and without the
//! gradient-norm penalty, probed on the same visited states.
//!
//! ```text
//! cargo run --release --example llc -- [lambda] [total_transitions]
//! ```

use robustrl::envs::{Env, EnvKind};
use robustrl::eval::{collect_states, estimate_llc, NetworkTag};
use robustrl::ppo::{train, TrainConfig, Variant};

fn main() -> robustrl::Result<()> {
    let mut args = std::env::args().skip(1);
    let lambda = args.next().map_or(1e-3, |s| s.parse().expect("lambda"));
    let total = args.next().map_or(100_000, |s| s.parse().expect("transitions"));
    let env = Env::nominal(EnvKind::CartPole);
    let run = |variant, lambda| {
        let config = TrainConfig {
            total_transitions: total,
            ..TrainConfig::for_variant(variant, 0.003, lambda)
        };
        train(&env, &config).map(|o| o.agent)
    };
    let plain = run(Variant::PpoPgd, 0.0)?;
    let reg = run(Variant::PpoPgdlc, lambda)?;
    let states: Vec<Vec<f64>> = collect_states(&plain, 250, 0)?
        .iter()
        .map(|s| plain.network_obs(s))
        .collect();
    for (name, agent) in [("lambda=0", &plain), ("penalized", &reg)] {
        for (tag, net) in [(NetworkTag::Critic, &agent.critic), (NetworkTag::Actor, &agent.policy.mean_net)] {
            let e = estimate_llc(net, tag, &states, 1e-3, 100, 0)?;
            println!(
                "{name:10} {:6}: LLC {:.4e} (sampled {:.4e}, gradient bound {:.4e})",
                tag.name(),
                e.estimate,
                e.sampled,
                e.gradient_bound
            );
        }
    }
    Ok(())
}
