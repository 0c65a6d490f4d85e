//! Input gradients and the gradient-norm penalty of a small critic, computed
//! by the fast network path and by the symbolic graph, side by side.
//!
//! ```text
//! cargo run --release --example autodiff
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robustrl::diffcore::{Activation, CompGraph, Mlp};

fn main() -> robustrl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = Mlp::new(vec![3, 16, 16, 1], Activation::Tanh, &mut rng)?;
    let x = [0.2, -0.4, 0.7];

    let (v, grad) = net.value_and_input_grad(&x)?;
    println!("V(x) = {v:.6}");
    println!("dV/dx = {grad:.6?}");

    // penalty ||dV/dx||_1^2 and its parameter gradient via double backprop
    let mut fast = vec![0.0; net.num_params()];
    let (penalty, _) = net.penalty_backward(&net.forward_cached(&x)?, 1.0, &mut fast)?;

    // the same quantity differentiated symbolically
    let mut g = CompGraph::new();
    let xs = g.inputs(x.len());
    let ps = g.inputs(net.num_params());
    let out = net.build_graph(&mut g, &xs, &ps)?[0];
    let dx = g.differentiate(out, &xs)?;
    let abs: Vec<_> = dx.iter().map(|&d| g.abs(d)).collect();
    let norm = g.sum(&abs);
    let pen = g.square(norm);
    let mut leaves = x.to_vec();
    leaves.extend_from_slice(net.params());
    let values = g.forward(&leaves)?;
    let symbolic = g.gradient(&values, pen, &ps)?;

    let diff = fast.iter().zip(&symbolic).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    println!("penalty = {penalty:.6} (graph {:.6})", values.get(pen));
    println!("{} parameter gradients, max difference {diff:.2e}", fast.len());
    Ok(())
}
