//! Evaluation of trained agents: robustness over a grid of perturbed
//! environments, action smoothness, and local Lipschitz constants.

mod export;
mod grid;
mod llc;
mod smoothness;

pub use export::{
    export_heatmap, grid_csv, llc_csv, load_report, parse_grid_csv, parse_rho_csv, rho_csv,
    smoothness_csv, to_json_bytes, GridCsv, GRID_CSV, GRID_META, LLC_CSV, RHO_CSV, SMOOTHNESS_CSV,
};
pub use grid::{
    episode_seed, ring_cells, ring_minima, run_grid, sweep, GridParam, PerturbationGrid,
    ReportMeta, RobustnessReport,
};
pub use llc::{estimate_llc, LlcEstimate, NetworkTag};
pub use smoothness::{collect_states, evaluate_episodes, smoothness, EpisodeSummary, SmoothnessReport};
