#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robustrl::diffcore::{Activation, Mlp};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random scalar-output network with 1 or 2 hidden layers.
pub fn random_critic(seed: u64, activation: Activation) -> Mlp {
    let mut r = rng(seed);
    let input = r.random_range(2..=6);
    let mut sizes = vec![input];
    for _ in 0..r.random_range(1..=2) {
        sizes.push(r.random_range(3..=12));
    }
    sizes.push(1);
    let mut net = Mlp::new(sizes, activation, &mut r).unwrap();
    // non-zero biases so the penalty is not symmetric about the origin
    for p in net.params_mut() {
        *p += r.random_range(-0.3..0.3);
    }
    net
}

pub fn random_point(r: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| r.random_range(-scale..scale)).collect()
}

pub fn fd_input_grad(net: &Mlp, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (net.value(&p).unwrap() - net.value(&m).unwrap()) / (2.0 * h)
        })
        .collect()
}

/// `||grad_x V(x)||_1^2` via the network's own input gradient.
pub fn penalty(net: &Mlp, x: &[f64]) -> f64 {
    let g = net.input_grad(x).unwrap();
    let n: f64 = g.iter().map(|v| v.abs()).sum();
    n * n
}

pub fn fd_penalty_param_grad(net: &Mlp, x: &[f64], h: f64) -> Vec<f64> {
    let mut work = net.clone();
    (0..net.num_params())
        .map(|k| {
            let orig = work.params()[k];
            work.params_mut()[k] = orig + h;
            let up = penalty(&work, x);
            work.params_mut()[k] = orig - h;
            let down = penalty(&work, x);
            work.params_mut()[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Norm-wise relative error `||a - b||_inf / ||b||_inf`, with the
/// denominator floored at `floor`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = b.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    diff / scale.max(floor)
}

/// Direct double-loop GAE: `A_t = sum_k (gamma xi)^k delta_{t+k}` up to and
/// including the end of `t`'s segment.
pub fn gae_oracle(td: &[f64], boundary: &[bool], gamma: f64, xi: f64) -> Vec<f64> {
    (0..td.len())
        .map(|t| {
            let mut sum = 0.0;
            let mut w = 1.0;
            for k in t..td.len() {
                sum += w * td[k];
                if boundary[k] {
                    break;
                }
                w *= gamma * xi;
            }
            sum
        })
        .collect()
}

/// Minimum over the cells at Chebyshev distance `rho` from the center,
/// found by scanning the whole matrix.
pub fn ring_min_brute(m: &[Vec<f64>], rho: usize) -> f64 {
    let c = m.len() / 2;
    let mut best = f64::INFINITY;
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i.abs_diff(c).max(j.abs_diff(c)) == rho {
                best = best.min(*v);
            }
        }
    }
    best
}

/// Critic whose first layer is scaled by `sharpness`, so that it bends
/// noticeably inside small balls.
pub fn sharp_critic(seed: u64, dim: usize, sharpness: f64) -> Mlp {
    let mut r = rng(seed);
    let mut net = Mlp::new(vec![dim, 16, 16, 1], Activation::Tanh, &mut r).unwrap();
    for w in &mut net.params_mut()[..16 * dim] {
        *w *= sharpness;
    }
    net
}
