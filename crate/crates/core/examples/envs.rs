//! Rolls out a hand-tuned controller on cart-pole and a passive pendulum,
//! nominal and with heavier, more damped bodies.
//!
//! ```text
//! cargo run --release --example envs
//! ```

use robustrl::envs::{run_episode, Env, EnvKind, Environment};

fn main() -> robustrl::Result<()> {
    let pd = |o: &[f64]| Ok(vec![10.0 * (10.0 * o[2] + o[3] + 0.1 * o[0] + 0.2 * o[1])]);
    for kind in [EnvKind::CartPole, EnvKind::Pendulum] {
        let nominal = Env::nominal(kind);
        for (mass, damping) in [(1.0, 1.0), (1.8, 1.0), (1.0, 0.2)] {
            let env = nominal.with_params(nominal.params().with_scales(mass, damping))?;
            let ep = match kind {
                EnvKind::CartPole => run_episode(&env, 7, pd)?,
                EnvKind::Pendulum => run_episode(&env, 7, |_| Ok(vec![0.0]))?,
            };
            let trk = ep
                .tracking_trace
                .map(|t| format!("  mean angle error {:.3}", t.iter().sum::<f64>() / t.len() as f64))
                .unwrap_or_default();
            println!(
                "{:9} mass x{mass:.1} damping x{damping:.1}: {:4} steps, return {:9.2}{trk}",
                env.name(),
                ep.length,
                ep.total_reward
            );
        }
    }
    Ok(())
}
