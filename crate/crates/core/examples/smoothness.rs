//! Action smoothness of a short pendulum policy over a few evaluation episodes.
//!
//! ```text
//! cargo run --release --example smoothness -- [total_transitions]
//! ```

use robustrl::envs::{Env, EnvKind};
use robustrl::eval::{evaluate_episodes, smoothness};
use robustrl::ppo::{train, TrainConfig};

fn main() -> robustrl::Result<()> {
    let scalar = |v: &[f64]| v.iter().map(|&x| vec![x]).collect::<Vec<_>>();
    for (name, trace) in [
        ("constant", vec![0.5; 6]),
        ("ramp", vec![0.0, 1.0, 2.0, 3.0, 4.0]),
        ("alternating", vec![1.0, -1.0, 1.0, -1.0, 1.0]),
    ] {
        let r = smoothness(&scalar(&trace), None)?;
        println!("{name:12} AS {:.1}  SFR {:.1}", r.action_smoothness, r.second_order_fluctuation);
    }

    let total = std::env::args().nth(1).map_or(40_000, |s| s.parse().expect("transitions"));
    let config = TrainConfig {
        total_transitions: total,
        normalize_obs: true,
        gamma: 0.98,
        ..Default::default()
    };
    let agent = train(&Env::nominal(EnvKind::Pendulum), &config)?.agent;
    for ep in evaluate_episodes(&agent, 5, 0)? {
        let s = ep.smoothness.expect("full-length episode");
        println!(
            "episode {}: return {:8.2}  AS {:.4}  SFR {:.4}  TRK {:.4}",
            ep.episode,
            ep.total_reward,
            s.action_smoothness,
            s.second_order_fluctuation,
            s.tracking_error.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
