//! Perturbation-grid sweeps and ρ-robustness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::{run_episode, Env, Environment};
use crate::error::{Error, Result};
use crate::ppo::Agent;
use crate::rng::{derive_seed, SeedStream};

/// Physical parameter scaled along a grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridParam {
    Mass,
    Damping,
}

impl GridParam {
    pub fn name(self) -> &'static str {
        match self {
            GridParam::Mass => "mass",
            GridParam::Damping => "damping",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationGrid {
    /// Cells per axis; odd so that the nominal cell is the center.
    pub size: usize,
    pub axis1: GridParam,
    pub axis2: GridParam,
    /// Smallest and largest scale; the center is always 1.0.
    pub scale_min: f64,
    pub scale_max: f64,
    /// Episodes per cell and per policy.
    pub episodes_per_cell: usize,
}

impl Default for PerturbationGrid {
    fn default() -> Self {
        PerturbationGrid {
            size: 11,
            axis1: GridParam::Mass,
            axis2: GridParam::Damping,
            scale_min: 0.2,
            scale_max: 1.8,
            episodes_per_cell: 20,
        }
    }
}

impl PerturbationGrid {
    pub fn validate(&self) -> Result<()> {
        if self.size.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "grid size must be odd, got {}",
                self.size
            )));
        }
        if self.episodes_per_cell == 0 {
            return Err(Error::InvalidInput("episodes_per_cell must be positive".into()));
        }
        if self.axis1 == self.axis2 {
            return Err(Error::InvalidInput("grid axes must differ".into()));
        }
        if !(self.scale_min > 0.0 && self.scale_min < 1.0 && self.scale_max > 1.0)
            || !self.scale_max.is_finite()
        {
            return Err(Error::InvalidInput(format!(
                "grid scales must satisfy 0 < min < 1 < max, got [{}, {}]",
                self.scale_min, self.scale_max
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> usize {
        self.size / 2
    }

    pub fn max_rho(&self) -> usize {
        self.size / 2
    }

    /// Scale values along either axis. Each half is evenly spaced, so the
    /// center is exactly 1.0 even when the range is not symmetric.
    pub fn scales(&self) -> Vec<f64> {
        let c = self.center();
        (0..self.size)
            .map(|i| {
                if i == c {
                    1.0
                } else if i < c {
                    self.scale_min + (1.0 - self.scale_min) * i as f64 / c as f64
                } else {
                    1.0 + (self.scale_max - 1.0) * (i - c) as f64 / c as f64
                }
            })
            .collect()
    }

    fn cell_env(&self, base: &Env, s1: f64, s2: f64) -> Result<Env> {
        let mut p = base.params();
        for (axis, s) in [(self.axis1, s1), (self.axis2, s2)] {
            match axis {
                GridParam::Mass => p.mass_scale *= s,
                GridParam::Damping => p.damping_scale *= s,
            }
        }
        base.with_params(p)
    }
}

/// Descriptive fields attached to a report by the caller.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMeta {
    pub env: String,
    pub variants: Vec<String>,
    pub epsilons: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub policy_seeds: Vec<u64>,
    pub checkpoints: Vec<String>,
    pub config_hash: Option<String>,
    pub library_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub grid: PerturbationGrid,
    pub eval_seed: u64,
    pub axis1_scales: Vec<f64>,
    pub axis2_scales: Vec<f64>,
    /// Mean return per cell, pooled over policies and episodes.
    pub cell_means: Vec<Vec<f64>>,
    /// `per_policy_means[p][i][j]`.
    pub per_policy_means: Vec<Vec<Vec<f64>>>,
    /// Set when any episode in the cell diverged numerically.
    pub diverged: Vec<Vec<bool>>,
    /// Minimum cell mean on each ring, indexed by radius.
    pub rho_robustness: Vec<f64>,
    pub meta: ReportMeta,
}

/// Cells `(i, j)` at Chebyshev index distance exactly `rho` from the center
/// of an `m × m` grid, walked clockwise from the top-left corner.
pub fn ring_cells(m: usize, rho: usize) -> Vec<(usize, usize)> {
    let c = m / 2;
    if rho > c {
        return Vec::new();
    }
    if rho == 0 {
        return vec![(c, c)];
    }
    let (lo, hi) = (c - rho, c + rho);
    let mut cells = Vec::with_capacity(8 * rho);
    for j in lo..hi {
        cells.push((lo, j));
    }
    for i in lo..hi {
        cells.push((i, hi));
    }
    for j in (lo + 1..=hi).rev() {
        cells.push((hi, j));
    }
    for i in (lo + 1..=hi).rev() {
        cells.push((i, lo));
    }
    cells
}

/// Ring minima of a square matrix with odd side length. NaN cells are
/// ignored unless a whole ring is NaN.
pub fn ring_minima(matrix: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = matrix.len();
    if m.is_multiple_of(2) || matrix.iter().any(|row| row.len() != m) {
        return Err(Error::InvalidInput("ring minima need an odd square matrix".into()));
    }
    Ok((0..=m / 2)
        .map(|rho| {
            ring_cells(m, rho)
                .into_iter()
                .map(|(i, j)| matrix[i][j])
                .fold(f64::NAN, f64::min)
        })
        .collect())
}

struct CellResult {
    per_policy: Vec<f64>,
    pooled: f64,
    diverged: bool,
}

/// Seed of episode `k` in cell `(i, j)`. The same seeds are used for every
/// policy, so policies are compared on common initial states.
pub fn episode_seed(eval_seed: u64, grid: &PerturbationGrid, i: usize, j: usize, k: usize) -> u64 {
    let index = ((i * grid.size + j) * grid.episodes_per_cell + k) as u64;
    derive_seed(eval_seed, SeedStream::Eval, index)
}

/// Sweeps the grid with arbitrary environments and controllers.
/// `make_env(s1, s2)` builds the environment for a cell and
/// `controller(p, obs)` is the action of policy `p`.
pub fn sweep<E, M, C>(
    grid: &PerturbationGrid,
    n_policies: usize,
    eval_seed: u64,
    make_env: M,
    controller: C,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>, Vec<Vec<bool>>)>
where
    E: Environment,
    M: Fn(f64, f64) -> Result<E> + Sync,
    C: Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync,
{
    grid.validate()?;
    if n_policies == 0 {
        return Err(Error::InvalidInput("no policies to evaluate".into()));
    }
    let m = grid.size;
    let scales = grid.scales();
    let cells: Vec<Result<CellResult>> = (0..m * m)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / m, idx % m);
            let env = make_env(scales[i], scales[j])?;
            let mut per_policy = Vec::with_capacity(n_policies);
            let mut diverged = false;
            let mut total = 0.0;
            for p in 0..n_policies {
                let mut sum = 0.0;
                for k in 0..grid.episodes_per_cell {
                    let ep = run_episode(&env, episode_seed(eval_seed, grid, i, j, k), |obs| {
                        controller(p, obs)
                    })?;
                    diverged |= ep.diverged;
                    sum += ep.total_reward;
                }
                total += sum;
                per_policy.push(sum / grid.episodes_per_cell as f64);
            }
            Ok(CellResult {
                per_policy,
                pooled: total / (n_policies * grid.episodes_per_cell) as f64,
                diverged,
            })
        })
        .collect();
    let mut pooled = vec![vec![0.0; m]; m];
    let mut per_policy = vec![vec![vec![0.0; m]; m]; n_policies];
    let mut diverged = vec![vec![false; m]; m];
    for (idx, cell) in cells.into_iter().enumerate() {
        let cell = cell?;
        let (i, j) = (idx / m, idx % m);
        pooled[i][j] = cell.pooled;
        diverged[i][j] = cell.diverged;
        for (p, v) in cell.per_policy.into_iter().enumerate() {
            per_policy[p][i][j] = v;
        }
    }
    Ok((pooled, per_policy, diverged))
}

/// Evaluates the mean actions of `agents` on every cell of the grid.
/// All agents must share an environment family; the grid scales are
/// applied on top of the first agent's physical parameters.
pub fn run_grid(agents: &[Agent], grid: &PerturbationGrid, eval_seed: u64) -> Result<RobustnessReport> {
    let base = &agents
        .first()
        .ok_or_else(|| Error::InvalidInput("no policies to evaluate".into()))?
        .env;
    if agents.iter().any(|a| a.env.kind() != base.kind()) {
        return Err(Error::InvalidInput("policies were trained on different environments".into()));
    }
    let (cell_means, per_policy_means, diverged) = sweep(
        grid,
        agents.len(),
        eval_seed,
        |s1, s2| grid.cell_env(base, s1, s2),
        |p, obs| agents[p].act_deterministic(obs),
    )?;
    let scales = grid.scales();
    Ok(RobustnessReport {
        grid: grid.clone(),
        eval_seed,
        axis1_scales: scales.clone(),
        axis2_scales: scales,
        rho_robustness: ring_minima(&cell_means)?,
        cell_means,
        per_policy_means,
        diverged,
        meta: ReportMeta {
            env: base.name().to_string(),
            library_version: crate::io::LIBRARY_VERSION.to_string(),
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_center_is_nominal() {
        let g = PerturbationGrid::default();
        let s = g.scales();
        assert_eq!(s.len(), 11);
        assert_eq!(s[5], 1.0);
        assert!((s[0] - 0.2).abs() < 1e-15);
        assert!((s[10] - 1.8).abs() < 1e-15);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        let one = PerturbationGrid { size: 1, ..g };
        assert_eq!(one.scales(), vec![1.0]);
    }

    #[test]
    fn rings_partition_the_grid() {
        let m = 7;
        let mut seen = vec![vec![0; m]; m];
        for rho in 0..=3 {
            let cells = ring_cells(m, rho);
            assert_eq!(cells.len(), if rho == 0 { 1 } else { 8 * rho });
            for (i, j) in cells {
                seen[i][j] += 1;
            }
        }
        assert!(seen.iter().flatten().all(|&c| c == 1));
    }

    #[test]
    fn planted_three_by_three() {
        let m = vec![
            vec![5.0, 6.0, 7.0],
            vec![8.0, 1.0, 9.0],
            vec![10.0, 4.0, 11.0],
        ];
        assert_eq!(ring_minima(&m).unwrap(), vec![1.0, 4.0]);
    }

    #[test]
    fn invalid_grids() {
        let g = PerturbationGrid::default();
        assert!(PerturbationGrid { size: 4, ..g.clone() }.validate().is_err());
        assert!(PerturbationGrid { episodes_per_cell: 0, ..g.clone() }.validate().is_err());
        assert!(PerturbationGrid { axis2: GridParam::Mass, ..g }.validate().is_err());
        assert!(ring_minima(&[vec![1.0, 2.0], vec![3.0, 4.0]]).is_err());
    }
}
