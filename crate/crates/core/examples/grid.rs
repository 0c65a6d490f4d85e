//! Trains a short cart-pole policy, sweeps it over a mass x damping grid and
//! writes the heatmap files.
//!
//! ```text
//! cargo run --release --example grid -- [out_dir] [total_transitions]
//! ```

use std::path::PathBuf;

use robustrl::envs::{Env, EnvKind};
use robustrl::eval::{export_heatmap, run_grid, PerturbationGrid};
use robustrl::ppo::{train, TrainConfig};

fn main() -> robustrl::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "runs/example-grid".into()));
    let total = args.next().map_or(60_000, |s| s.parse().expect("transitions"));
    let config = TrainConfig { total_transitions: total, ..Default::default() };
    let agent = train(&Env::nominal(EnvKind::CartPole), &config)?.agent;
    let grid = PerturbationGrid { size: 7, episodes_per_cell: 5, ..Default::default() };
    let report = run_grid(&[agent], &grid, 0)?;
    print!("{:>6}", "m\\d");
    for s in &report.axis2_scales {
        print!("{s:7.2}");
    }
    println!();
    for (s, row) in report.axis1_scales.iter().zip(&report.cell_means) {
        print!("{s:6.2}");
        for v in row {
            print!("{v:7.1}");
        }
        println!();
    }
    println!("rho-robustness {:.1?}", report.rho_robustness);
    export_heatmap(&report, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
