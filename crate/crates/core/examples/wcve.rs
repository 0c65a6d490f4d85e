//! Worst-case value of a bent critic inside an L-infinity ball: the
//! first-order estimate, projected gradient descent, and a brute-force grid.
//!
//! ```text
//! cargo run --release --example wcve -- [epsilon]
//! ```

use robustrl::wcve::{brute_solve, gbr_estimate, pgd_solve, FnCritic, UncertaintySet};

fn main() -> robustrl::Result<()> {
    let epsilon = std::env::args().nth(1).map_or(0.1, |s| s.parse().expect("epsilon"));
    let v = FnCritic::new(
        2,
        |x: &[f64]| (6.0 * x[0]).sin() + x[1] * x[1],
        |x: &[f64]| vec![6.0 * (6.0 * x[0]).cos(), 2.0 * x[1]],
    );
    let s = [0.2, 0.05];
    let set = UncertaintySet::new(epsilon).with_steps(20);
    for sol in [gbr_estimate(&v, &s, &set)?, pgd_solve(&v, &s, &set)?, brute_solve(&v, &s, &set, 401)?] {
        println!(
            "{:?}: value {:+.6} at {:.4?}",
            sol.solver_tag, sol.worst_value, sol.worst_state
        );
    }
    Ok(())
}
