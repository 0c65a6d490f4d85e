mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use robustrl::diffcore::{clip_grad_norm, Activation, AdamState, CompGraph, Mlp, NetworkCheckpoint};
use robustrl::rng::RngState;
use robustrl::Error;

/// Builds V and `||grad_x V||_1^2` on a graph with inputs and parameters as
/// leaves, and returns the graph's parameter gradient of the penalty.
fn graph_penalty_param_grad(net: &Mlp, x: &[f64]) -> (f64, Vec<f64>) {
    let mut g = CompGraph::new();
    let xs = g.inputs(x.len());
    let ps = g.inputs(net.num_params());
    let out = net.build_graph(&mut g, &xs, &ps).unwrap()[0];
    let dx = g.differentiate(out, &xs).unwrap();
    let abs: Vec<_> = dx.iter().map(|&d| g.abs(d)).collect();
    let norm = g.sum(&abs);
    let pen = g.square(norm);
    let mut leaves = x.to_vec();
    leaves.extend_from_slice(net.params());
    let values = g.forward(&leaves).unwrap();
    (values.get(pen), g.gradient(&values, pen, &ps).unwrap())
}

#[test]
fn input_gradient_matches_finite_differences() {
    for seed in 0..50 {
        let net = random_critic(seed, Activation::Tanh);
        let mut r = rng(seed + 1000);
        let x = random_point(&mut r, net.input_dim(), 1.5);
        let g = net.input_grad(&x).unwrap();
        let fd = fd_input_grad(&net, &x, 1e-5);
        assert!(rel_err(&g, &fd, 1e-8) < 1e-6, "seed {seed}");
    }
}

#[test]
fn penalty_gradient_matches_finite_differences() {
    for seed in 0..30 {
        let net = random_critic(seed, Activation::Tanh);
        let mut r = rng(seed + 2000);
        let x = random_point(&mut r, net.input_dim(), 1.0);
        let mut grad = vec![0.0; net.num_params()];
        let cache = net.forward_cached(&x).unwrap();
        let (p, _) = net.penalty_backward(&cache, 1.0, &mut grad).unwrap();
        assert!((p - penalty(&net, &x)).abs() < 1e-12 * p.max(1.0));
        let fd = fd_penalty_param_grad(&net, &x, 1e-6);
        assert!(rel_err(&grad, &fd, 1e-8) < 1e-4, "seed {seed}");
    }
}

#[test]
fn double_backprop_agrees_with_symbolic_graph() {
    for (seed, act) in [(1, Activation::Tanh), (2, Activation::Relu), (3, Activation::Identity)] {
        for k in 0..10 {
            let net = random_critic(seed * 100 + k, act);
            let mut r = rng(seed * 100 + k + 7);
            let x = random_point(&mut r, net.input_dim(), 1.0);
            let (pg, gg) = graph_penalty_param_grad(&net, &x);
            let mut fast = vec![0.0; net.num_params()];
            let (pf, _) = net
                .penalty_backward(&net.forward_cached(&x).unwrap(), 1.0, &mut fast)
                .unwrap();
            assert!((pg - pf).abs() <= 1e-12 * pg.abs().max(1.0));
            assert!(rel_err(&fast, &gg, 1e-12) < 1e-10, "{act:?} {k}");
        }
    }
}

#[test]
fn graph_forward_matches_network() {
    let net = random_critic(5, Activation::Tanh);
    let mut g = CompGraph::new();
    let xs = g.inputs(net.input_dim());
    let ps = g.inputs(net.num_params());
    let out = net.build_graph(&mut g, &xs, &ps).unwrap()[0];
    let x = vec![0.3; net.input_dim()];
    let mut leaves = x.clone();
    leaves.extend_from_slice(net.params());
    let values = g.forward(&leaves).unwrap();
    assert!((values.get(out) - net.value(&x).unwrap()).abs() < 1e-14);
    let pg = g.gradient(&values, out, &ps).unwrap();
    let fast = net.param_grad(&x).unwrap();
    assert!(rel_err(&fast, &pg, 1e-12) < 1e-12);
}

#[test]
fn linear_penalty_closed_form() {
    let w = [0.5, -1.5, 2.0];
    let mut params = w.to_vec();
    params.push(-0.7);
    let net = Mlp::from_params(vec![3, 1], Activation::Tanh, params).unwrap();
    let mut r = rng(3);
    for _ in 0..20 {
        let x = random_point(&mut r, 3, 5.0);
        let mut grad = vec![0.0; 4];
        let (p, g) = net
            .penalty_backward(&net.forward_cached(&x).unwrap(), 1.0, &mut grad)
            .unwrap();
        assert_eq!(p, 16.0);
        assert_eq!(g, w.to_vec());
        // d/dw_i (sum |w|)^2 = 2 * 4 * sign(w_i); the bias does not enter
        assert_eq!(grad, vec![8.0, -8.0, 8.0, 0.0]);
    }
}

#[test]
fn second_derivative_of_cube() {
    // f = x^3 via x * x^2; f'' = 6x
    let mut g = CompGraph::new();
    let x = g.input();
    let sq = g.square(x);
    let f = g.mul(x, sq);
    let d1 = g.differentiate(f, &[x]).unwrap()[0];
    let d2 = g.differentiate(d1, &[x]).unwrap()[0];
    let v = g.forward(&[1.5]).unwrap();
    assert!((v.get(d1) - 6.75).abs() < 1e-14);
    assert!((v.get(d2) - 9.0).abs() < 1e-14);
}

#[test]
fn graph_rejects_wrong_input_count() {
    let mut g = CompGraph::new();
    let a = g.input();
    let b = g.input();
    g.add(a, b);
    assert!(matches!(g.forward(&[1.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
}

#[test]
fn adam_minimizes_quadratic() {
    let mut x = vec![3.0, -2.0];
    let mut opt = AdamState::new(2, 0.05);
    for _ in 0..2000 {
        let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        opt.step(&mut x, &g).unwrap();
    }
    assert!(x.iter().all(|v| v.abs() < 1e-3), "{x:?}");
}

#[test]
fn adam_rejects_non_finite_without_mutation() {
    let mut x = vec![1.0, 1.0];
    let mut opt = AdamState::new(2, 0.1);
    opt.step(&mut x, &[0.5, 0.5]).unwrap();
    let (before_x, before_opt) = (x.clone(), opt.clone());
    assert!(matches!(opt.step(&mut x, &[f64::NAN, 0.0]), Err(Error::Divergence(_))));
    assert_eq!(x, before_x);
    assert_eq!(opt, before_opt);
}

#[test]
fn clip_scales_to_max_norm() {
    let mut g = vec![3.0, 4.0];
    assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
    assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    let mut small = vec![0.1, 0.1];
    clip_grad_norm(&mut small, 1.0);
    assert_eq!(small, vec![0.1, 0.1]);
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let net = random_critic(9, Activation::Tanh);
    let mut opt = AdamState::new(net.num_params(), 1e-3);
    let mut p = net.params().to_vec();
    let g = vec![0.1; p.len()];
    opt.step(&mut p, &g).unwrap();
    let mut r = rng(4);
    let _: u64 = r.random();
    let ck = NetworkCheckpoint::new(net, Some(opt), Some(RngState::capture(&r)));
    let back = NetworkCheckpoint::from_json(&ck.to_json()).unwrap();
    assert_eq!(back, ck);
    let mut resumed = back.rng.unwrap().restore().unwrap();
    assert_eq!(resumed.random::<u64>(), r.random::<u64>());
}

#[test]
fn checkpoint_version_mismatch_is_explicit() {
    let ck = NetworkCheckpoint::new(Mlp::zeros(vec![2, 1], Activation::Tanh).unwrap(), None, None);
    let text = ck.to_json().replace("\"format_version\": 1", "\"format_version\": 99");
    assert!(matches!(
        NetworkCheckpoint::from_json(&text),
        Err(Error::CheckpointVersion { found: 99, expected: 1 })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn input_grad_equals_graph_gradient(seed in 0u64..10_000, scale in 0.1f64..3.0) {
        let net = random_critic(seed, Activation::Tanh);
        let mut r = rng(seed ^ 0xabc);
        let x = random_point(&mut r, net.input_dim(), scale);
        let mut g = CompGraph::new();
        let xs = g.inputs(x.len());
        let ps = g.inputs(net.num_params());
        let out = net.build_graph(&mut g, &xs, &ps).unwrap()[0];
        let mut leaves = x.clone();
        leaves.extend_from_slice(net.params());
        let values = g.forward(&leaves).unwrap();
        let graph = g.gradient(&values, out, &xs).unwrap();
        let fast = net.input_grad(&x).unwrap();
        prop_assert!(rel_err(&fast, &graph, 1e-12) < 1e-12);
    }

    #[test]
    fn penalty_is_nonnegative_and_scales_with_weight(seed in 0u64..10_000, w in 0.0f64..10.0) {
        let net = random_critic(seed, Activation::Relu);
        let mut r = rng(seed);
        let x = random_point(&mut r, net.input_dim(), 1.0);
        let cache = net.forward_cached(&x).unwrap();
        let mut g1 = vec![0.0; net.num_params()];
        let mut gw = vec![0.0; net.num_params()];
        let (p1, _) = net.penalty_backward(&cache, 1.0, &mut g1).unwrap();
        let (pw, _) = net.penalty_backward(&cache, w, &mut gw).unwrap();
        prop_assert!(p1 >= 0.0);
        prop_assert_eq!(p1, pw);
        for (a, b) in g1.iter().zip(&gw) {
            prop_assert!((a * w - b).abs() <= 1e-12 * (a * w).abs().max(1.0));
        }
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate(g in -1e3f64..1e3, lr in 1e-5f64..1e-1) {
        prop_assume!(g.abs() > 1e-3);
        let mut x = vec![0.0];
        let mut opt = AdamState::new(1, lr);
        opt.step(&mut x, &[g]).unwrap();
        // bias-corrected first step is lr * g / (|g| + eps)
        let expected = -lr * g / (g.abs() + 1e-8);
        prop_assert!((x[0] - expected).abs() < 1e-12);
    }
}
