mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use robustrl::diffcore::{Activation, Mlp};
use robustrl::envs::{run_episode, Env, EnvKind, EnvState, Environment, PhysicsParams, StepResult};
use robustrl::eval::{
    estimate_llc, evaluate_episodes, export_heatmap, grid_csv, load_report, parse_grid_csv,
    parse_rho_csv, ring_cells, ring_minima, run_grid, smoothness, smoothness_csv, sweep,
    NetworkTag, PerturbationGrid, GRID_CSV, RHO_CSV,
};
use robustrl::ppo::{Agent, GaussianPolicy};
use robustrl::{Error, Result};

/// Pays one per step for exactly 100 steps, whatever the parameters.
struct Flat {
    params: PhysicsParams,
}

impl Environment for Flat {
    fn name(&self) -> &'static str {
        "flat"
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn action_dim(&self) -> usize {
        1
    }
    fn action_bound(&self) -> f64 {
        1.0
    }
    fn horizon(&self) -> usize {
        100
    }
    fn params(&self) -> PhysicsParams {
        self.params
    }
    fn reset(&self, seed: u64) -> EnvState {
        EnvState { values: vec![(seed % 7) as f64], step_counter: 0 }
    }
    fn step(&self, state: &EnvState, _action: &[f64]) -> Result<StepResult> {
        let n = state.step_counter + 1;
        Ok(StepResult {
            state: EnvState { values: state.values.clone(), step_counter: n },
            reward: 1.0,
            terminated: false,
            truncated: n == 100,
        })
    }
    fn observe(&self, state: &EnvState) -> Vec<f64> {
        state.values.clone()
    }
}

fn small_grid(size: usize, episodes: usize) -> PerturbationGrid {
    PerturbationGrid { size, episodes_per_cell: episodes, ..Default::default() }
}

fn random_agent(seed: u64, kind: EnvKind) -> Agent {
    let env = Env::nominal(kind);
    let mut r = rng(seed);
    let policy = GaussianPolicy::new(env.obs_dim(), 1, &[8], Activation::Tanh, -1.0, &mut r).unwrap();
    let critic = Mlp::new(vec![env.obs_dim(), 8, 1], Activation::Tanh, &mut r).unwrap();
    Agent { env, policy, critic, normalizer: None }
}

fn scalar(v: &[f64]) -> Vec<Vec<f64>> {
    v.iter().map(|&x| vec![x]).collect()
}

#[test]
fn constant_return_grid_is_flat() {
    let grid = small_grid(5, 3);
    let (pooled, per_policy, diverged) = sweep(
        &grid,
        2,
        0,
        |s1, s2| Ok(Flat { params: PhysicsParams::nominal(9.8).with_scales(s1, s2) }),
        |_, _| Ok(vec![0.0]),
    )
    .unwrap();
    assert!(pooled.iter().flatten().all(|&v| v == 100.0));
    assert!(per_policy.iter().flatten().flatten().all(|&v| v == 100.0));
    assert!(diverged.iter().flatten().all(|&d| !d));
    assert_eq!(ring_minima(&pooled).unwrap(), vec![100.0; 3]);
}

#[test]
fn constant_grid_exports_exact_values() {
    let dir = tempfile::tempdir().unwrap();
    let agent = random_agent(0, EnvKind::CartPole);
    let mut report = run_grid(&[agent], &small_grid(3, 1), 5).unwrap();
    report.cell_means = vec![vec![100.0; 3]; 3];
    report.rho_robustness = ring_minima(&report.cell_means).unwrap();
    export_heatmap(&report, dir.path()).unwrap();
    let parsed = parse_grid_csv(&std::fs::read(dir.path().join(GRID_CSV)).unwrap()).unwrap();
    assert_eq!(parsed.values, vec![vec![100.0; 3]; 3]);
    assert_eq!(parsed.axis1_scales, vec![0.2, 1.0, 1.8]);
    let rho = parse_rho_csv(&std::fs::read(dir.path().join(RHO_CSV)).unwrap()).unwrap();
    assert_eq!(rho, vec![100.0, 100.0]);
    assert_eq!(load_report(dir.path()).unwrap(), report);
}

#[test]
fn one_cell_grid_equals_nominal_evaluation() {
    let agent = random_agent(3, EnvKind::Pendulum);
    let grid = small_grid(1, 4);
    let report = run_grid(std::slice::from_ref(&agent), &grid, 9).unwrap();
    let direct: f64 = (0..4)
        .map(|k| {
            let seed = robustrl::eval::episode_seed(9, &grid, 0, 0, k);
            run_episode(&agent.env, seed, |o| agent.act_deterministic(o)).unwrap().total_reward
        })
        .sum::<f64>()
        / 4.0;
    assert_eq!(report.cell_means, vec![vec![direct]]);
    assert_eq!(report.rho_robustness, vec![direct]);
}

#[test]
fn grid_reports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let agents = [random_agent(1, EnvKind::CartPole), random_agent(2, EnvKind::CartPole)];
    let report = run_grid(&agents, &small_grid(3, 2), 4).unwrap();
    assert_eq!(report.per_policy_means.len(), 2);
    for i in 0..3 {
        for j in 0..3 {
            let mean = (report.per_policy_means[0][i][j] + report.per_policy_means[1][i][j]) / 2.0;
            assert!((report.cell_means[i][j] - mean).abs() < 1e-12);
        }
    }
    export_heatmap(&report, dir.path()).unwrap();
    let back = load_report(dir.path()).unwrap();
    assert_eq!(back, report);
    assert_eq!(grid_csv(&back), std::fs::read(dir.path().join(GRID_CSV)).unwrap());
}

#[test]
fn grid_rejects_mixed_environments_and_bad_shapes() {
    let agents = [random_agent(1, EnvKind::CartPole), random_agent(2, EnvKind::Pendulum)];
    assert!(run_grid(&agents, &small_grid(3, 1), 0).is_err());
    assert!(run_grid(&[], &small_grid(3, 1), 0).is_err());
    assert!(run_grid(&agents[..1], &small_grid(4, 1), 0).is_err());
    assert!(ring_minima(&[vec![1.0, 2.0], vec![3.0, 4.0]]).is_err());
}

#[test]
fn grid_is_deterministic_across_thread_counts() {
    let agents = [random_agent(4, EnvKind::CartPole)];
    let grid = small_grid(5, 2);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_grid(&agents, &grid, 1).unwrap())
    };
    assert_eq!(grid_csv(&run(1)), grid_csv(&run(4)));
}

#[test]
fn smoothness_unit_cases() {
    let constant = smoothness(&scalar(&[0.5; 6]), None).unwrap();
    assert_eq!((constant.action_smoothness, constant.second_order_fluctuation), (0.0, 0.0));
    let ramp = smoothness(&scalar(&[0.0, 1.0, 2.0, 3.0, 4.0]), None).unwrap();
    assert_eq!((ramp.action_smoothness, ramp.second_order_fluctuation), (1.0, 0.0));
    let alt = smoothness(&scalar(&[1.0, -1.0, 1.0, -1.0, 1.0, -1.0]), None).unwrap();
    assert_eq!((alt.action_smoothness, alt.second_order_fluctuation), (2.0, 4.0));
    assert!(alt.tracking_error.is_none());
}

#[test]
fn smoothness_tracking_and_errors() {
    let r = smoothness(&scalar(&[0.0, 0.0, 0.0]), Some(&[1.0, 2.0, 3.0])).unwrap();
    assert_eq!(r.tracking_error, Some(2.0));
    assert!(matches!(smoothness(&scalar(&[0.0, 1.0]), None), Err(Error::InvalidInput(_))));
    assert!(smoothness(&scalar(&[0.0, 1.0, 2.0]), Some(&[])).is_err());
}

#[test]
fn episode_summaries_and_csv_columns() {
    let agent = random_agent(6, EnvKind::Pendulum);
    let eps = evaluate_episodes(&agent, 3, 2).unwrap();
    assert_eq!(eps.len(), 3);
    assert!(eps.iter().all(|e| e.length == 200 && e.smoothness.unwrap().tracking_error.is_some()));
    let text = String::from_utf8(smoothness_csv(&eps, true)).unwrap();
    assert_eq!(text.lines().next().unwrap(), "episode,seed,return,length,diverged,as,sfr,trk");
    assert_eq!(text.lines().count(), 4);
    let plain = String::from_utf8(smoothness_csv(&eps, false)).unwrap();
    assert!(!plain.lines().next().unwrap().contains("trk"));
    assert!(evaluate_episodes(&agent, 0, 2).is_err());
}

#[test]
fn llc_of_linear_map_is_weight_norm() {
    let w = [0.5, -2.0, 1.0];
    let net = Mlp::from_params(vec![3, 1], Activation::Identity, vec![w[0], w[1], w[2], 0.3]).unwrap();
    let mut r = rng(0);
    let states: Vec<Vec<f64>> = (0..20).map(|_| random_point(&mut r, 3, 1.0)).collect();
    let est = estimate_llc(&net, NetworkTag::Critic, &states, 1e-3, 50, 0).unwrap();
    assert!((est.gradient_bound - 3.5).abs() < 1e-12);
    // random sign vertices: the aligned one is hit with probability 1 - (7/8)^50
    assert!((est.sampled - 3.5).abs() < 1e-9);
    assert_eq!(est.estimate, est.gradient_bound.max(est.sampled));
}

#[test]
fn llc_of_constant_map_is_zero() {
    let net = Mlp::from_params(vec![2, 1], Activation::Identity, vec![0.0, 0.0, 4.0]).unwrap();
    let states = vec![vec![0.1, 0.2], vec![-1.0, 3.0]];
    let est = estimate_llc(&net, NetworkTag::Actor, &states, 1e-3, 10, 1).unwrap();
    assert_eq!(est.estimate, 0.0);
    assert!(estimate_llc(&net, NetworkTag::Actor, &[], 1e-3, 10, 1).is_err());
    assert!(estimate_llc(&net, NetworkTag::Actor, &states, 0.0, 10, 1).is_err());
}

#[test]
fn llc_grows_with_probe_count() {
    let net = sharp_critic(5, 3, 10.0);
    let mut r = rng(5);
    let states: Vec<Vec<f64>> = (0..10).map(|_| random_point(&mut r, 3, 0.5)).collect();
    let mut last = 0.0;
    for n in [1, 4, 16, 64] {
        let est = estimate_llc(&net, NetworkTag::Critic, &states, 1e-2, n, 3).unwrap();
        assert!(est.sampled >= last);
        last = est.sampled;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_minima_match_brute_force(seed in 0u64..100_000, half in 0usize..6) {
        let m = 2 * half + 1;
        let mut r = rng(seed);
        let matrix: Vec<Vec<f64>> = (0..m).map(|_| (0..m).map(|_| r.random_range(-100.0..500.0)).collect()).collect();
        let minima = ring_minima(&matrix).unwrap();
        prop_assert_eq!(minima.len(), half + 1);
        for (rho, v) in minima.iter().enumerate() {
            prop_assert_eq!(*v, ring_min_brute(&matrix, rho));
        }
    }

    #[test]
    fn rings_partition_the_grid(half in 0usize..8) {
        let m = 2 * half + 1;
        let mut seen = vec![vec![0u8; m]; m];
        for rho in 0..=half {
            let cells = ring_cells(m, rho);
            prop_assert_eq!(cells.len(), if rho == 0 { 1 } else { 8 * rho });
            for (i, j) in cells {
                seen[i][j] += 1;
            }
        }
        prop_assert!(seen.iter().flatten().all(|&c| c == 1));
    }

    #[test]
    fn smoothness_is_shift_invariant(
        a in proptest::collection::vec(-5.0f64..5.0, 3..30),
        shift in -10.0f64..10.0,
    ) {
        let base = smoothness(&scalar(&a), None).unwrap();
        let shifted: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let moved = smoothness(&scalar(&shifted), None).unwrap();
        prop_assert!((base.action_smoothness - moved.action_smoothness).abs() < 1e-9);
        prop_assert!((base.second_order_fluctuation - moved.second_order_fluctuation).abs() < 1e-9);
        prop_assert!(base.action_smoothness >= 0.0 && base.second_order_fluctuation >= 0.0);
    }
}
