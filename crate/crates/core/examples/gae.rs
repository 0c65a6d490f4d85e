//! Nominal and worst-case advantages on a short hand-written rollout.
//!
//! ```text
//! cargo run --release --example gae
//! ```

use robustrl::diffcore::{Activation, Mlp};
use robustrl::ppo::{compute_gae, compute_worst_case_gae, GaeParams, RolloutBuffer, Transition};
use robustrl::wcve::{Solver, UncertaintySet};

fn main() -> robustrl::Result<()> {
    // V(s) = tanh(3 s0 - s1)
    let critic = Mlp::from_params(vec![2, 1, 1], Activation::Tanh, vec![3.0, -1.0, 0.0, 1.0, 0.0])?;
    let states = [[0.0, 0.0], [0.1, 0.2], [0.3, 0.1], [0.2, -0.2], [0.5, 0.0]];
    let transitions: Vec<Transition> = (0..4)
        .map(|t| Transition {
            obs: states[t].to_vec(),
            action: vec![0.0],
            log_prob: 0.0,
            reward: 1.0,
            next_obs: states[t + 1].to_vec(),
            terminal: false,
            boundary: t == 3,
        })
        .collect();
    let buffer = RolloutBuffer::new(transitions);
    let params = GaeParams { gamma: 0.99, xi: 0.95 };
    let nominal = compute_gae(&buffer, &critic, &params)?;
    let robust = compute_worst_case_gae(&buffer, &critic, Solver::Pgd, &UncertaintySet::new(0.05), &params)?;
    println!(" t  td        adv       worst td  worst adv");
    for t in 0..4 {
        println!(
            "{t:2}  {:+.5}  {:+.5}  {:+.5}  {:+.5}",
            nominal.td_errors[t], nominal.advantages[t], robust.td_errors[t], robust.advantages[t]
        );
    }
    Ok(())
}
