//! Feedforward networks with hand-written reverse passes.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix of
//! a layer in row-major `(n_out, n_in)` order followed by its bias vector.
//! Hidden layers use the configured activation; the output layer is affine.
//!
//! Besides the usual forward/backward pair the network implements the
//! reverse pass *through* its own input-gradient computation
//! ([`Mlp::penalty_backward`]), which is what the gradient-norm penalty on
//! the critic needs. [`Mlp::build_graph`] lays the same network out on a
//! [`CompGraph`] so both routes can be checked against each other.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{sign, CompGraph, NodeId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    /// Subgradient at 0 is 0.
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// First derivative from the pre-activation `z` and the activated `h`.
    #[inline]
    fn first(self, z: f64, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    #[inline]
    fn second(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => -2.0 * h * (1.0 - h * h),
            Activation::Relu | Activation::Identity => 0.0,
        }
    }
}

/// Intermediate values of one forward pass, needed by the reverse passes.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `post[0]` is the input, `post[l]` the activated output of layer `l-1`.
    post: Vec<Vec<f64>>,
    /// Pre-activations of every layer, output layer last.
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.pre.last().expect("network has at least one layer")
    }

    pub fn input(&self) -> &[f64] {
        &self.post[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRecord", into = "MlpRecord")]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpRecord {
    layer_sizes: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
    params: Vec<f64>,
}

impl TryFrom<MlpRecord> for Mlp {
    type Error = Error;

    fn try_from(r: MlpRecord) -> Result<Self> {
        if r.output_activation != Activation::Identity {
            return Err(Error::InvalidInput(
                "only identity output activations are supported".into(),
            ));
        }
        Mlp::from_params(r.layer_sizes, r.hidden_activation, r.params)
    }
}

impl From<Mlp> for MlpRecord {
    fn from(m: Mlp) -> Self {
        MlpRecord {
            layer_sizes: m.layer_sizes,
            hidden_activation: m.activation,
            output_activation: Activation::Identity,
            params: m.params,
        }
    }
}

pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl Mlp {
    /// All-zero network.
    pub fn zeros(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "layer sizes must list at least two positive sizes, got {layer_sizes:?}"
            )));
        }
        let n = param_count(&layer_sizes);
        let mut offsets = Vec::with_capacity(layer_sizes.len());
        let mut off = 0;
        for w in layer_sizes.windows(2) {
            offsets.push(off);
            off += (w[0] + 1) * w[1];
        }
        Ok(Mlp {
            layer_sizes,
            activation,
            params: vec![0.0; n],
            offsets,
        })
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: Vec<usize>,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, activation)?;
        for l in 0..net.n_layers() {
            let (n_in, n_out) = net.layer_shape(l);
            let bound = 1.0 / (n_in as f64).sqrt();
            let off = net.offsets[l];
            for w in &mut net.params[off..off + n_in * n_out] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn from_params(
        layer_sizes: Vec<usize>,
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, activation)?;
        if params.len() != net.params.len() {
            return Err(Error::DimensionMismatch {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_shape(&self, l: usize) -> (usize, usize) {
        (self.layer_sizes[l], self.layer_sizes[l + 1])
    }

    fn weights(&self, l: usize) -> &[f64] {
        let (n_in, n_out) = self.layer_shape(l);
        &self.params[self.offsets[l]..self.offsets[l] + n_in * n_out]
    }

    fn biases(&self, l: usize) -> &[f64] {
        let (n_in, n_out) = self.layer_shape(l);
        let off = self.offsets[l] + n_in * n_out;
        &self.params[off..off + n_out]
    }

    fn is_hidden(&self, l: usize) -> bool {
        l + 1 < self.n_layers()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_grad(&self, grad: &[f64]) -> Result<()> {
        if grad.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: grad.len(),
            });
        }
        Ok(())
    }

    fn check_scalar(&self) -> Result<()> {
        if self.output_dim() != 1 {
            return Err(Error::Contract(format!(
                "operation needs a scalar-output network, this one has {} outputs",
                self.output_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        for l in 0..self.n_layers() {
            let mut z = affine(self.weights(l), self.biases(l), &h);
            if self.is_hidden(l) {
                for v in &mut z {
                    *v = self.activation.apply(*v);
                }
            }
            h = z;
        }
        Ok(h)
    }

    /// Scalar output of a one-output network.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_scalar()?;
        Ok(self.forward(x)?[0])
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        self.check_input(x)?;
        let n = self.n_layers();
        let mut post = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        post.push(x.to_vec());
        for l in 0..n {
            let z = affine(self.weights(l), self.biases(l), &post[l]);
            if self.is_hidden(l) {
                post.push(z.iter().map(|&v| self.activation.apply(v)).collect());
            }
            pre.push(z);
        }
        Ok(ForwardCache { post, pre })
    }

    /// Reverse pass for an output adjoint `seed`. Parameter gradients are
    /// *added* to `param_grad` (pass an empty slice to skip them); the input
    /// adjoint is returned.
    pub fn backward(&self, cache: &ForwardCache, seed: &[f64], param_grad: &mut [f64]) -> Vec<f64> {
        assert_eq!(seed.len(), self.output_dim(), "seed length");
        let want_params = !param_grad.is_empty();
        if want_params {
            assert_eq!(param_grad.len(), self.num_params(), "gradient length");
        }
        let mut adj = seed.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = self.layer_shape(l);
            if self.is_hidden(l) {
                let z = &cache.pre[l];
                let h = &cache.post[l + 1];
                for i in 0..n_out {
                    adj[i] *= self.activation.first(z[i], h[i]);
                }
            }
            let w = self.weights(l);
            if want_params {
                let x = &cache.post[l];
                let off = self.offsets[l];
                for i in 0..n_out {
                    let d = adj[i];
                    if d != 0.0 {
                        let row = &mut param_grad[off + i * n_in..off + (i + 1) * n_in];
                        for (g, &xj) in row.iter_mut().zip(x) {
                            *g += d * xj;
                        }
                    }
                    param_grad[off + n_in * n_out + i] += d;
                }
            }
            adj = transpose_mul(w, &adj, n_in, n_out);
        }
        adj
    }

    /// Gradient of a scalar output with respect to the input.
    pub fn input_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_scalar()?;
        let cache = self.forward_cached(x)?;
        Ok(self.backward(&cache, &[1.0], &mut []))
    }

    pub fn value_and_input_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_scalar()?;
        let cache = self.forward_cached(x)?;
        let g = self.backward(&cache, &[1.0], &mut []);
        Ok((cache.output()[0], g))
    }

    /// Jacobian rows `d out_k / d x`, one per output.
    pub fn input_jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let cache = self.forward_cached(x)?;
        let m = self.output_dim();
        Ok((0..m)
            .map(|k| {
                let mut seed = vec![0.0; m];
                seed[k] = 1.0;
                self.backward(&cache, &seed, &mut [])
            })
            .collect())
    }

    /// Gradient of the scalar output with respect to every parameter.
    pub fn param_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_scalar()?;
        let cache = self.forward_cached(x)?;
        let mut g = vec![0.0; self.num_params()];
        self.backward(&cache, &[1.0], &mut g);
        Ok(g)
    }

    /// Lipschitz penalty `||d out / d x||_1^2` of a scalar-output network at
    /// the cached input. Adds `weight` times its parameter gradient to
    /// `param_grad` and returns `(penalty, input_gradient)`.
    ///
    /// The 1-norm uses `sign(0) = 0`.
    pub fn penalty_backward(
        &self,
        cache: &ForwardCache,
        weight: f64,
        param_grad: &mut [f64],
    ) -> Result<(f64, Vec<f64>)> {
        self.check_scalar()?;
        self.check_grad(param_grad)?;
        let n = self.n_layers();

        // Input-gradient chain, keeping every intermediate:
        //   u[l]  adjoint of layer l's pre-activation
        //   v[l]  adjoint of layer l's input (v[0] is the input gradient)
        let mut u: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut v: Vec<Vec<f64>> = vec![Vec::new(); n];
        u[n - 1] = vec![1.0];
        for l in (0..n).rev() {
            let (n_in, n_out) = self.layer_shape(l);
            v[l] = transpose_mul(self.weights(l), &u[l], n_in, n_out);
            if l > 0 {
                let z = &cache.pre[l - 1];
                let h = &cache.post[l];
                u[l - 1] = v[l]
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| a * self.activation.first(z[i], h[i]))
                    .collect();
            }
        }
        let g = v[0].clone();
        let norm1: f64 = g.iter().map(|x| x.abs()).sum();
        let penalty = norm1 * norm1;
        if weight == 0.0 {
            return Ok((penalty, g));
        }

        // Reverse through the chain above, from v[0] upward.
        let mut v_bar: Vec<f64> = g.iter().map(|&x| weight * 2.0 * norm1 * sign(x)).collect();
        let mut z_direct: Vec<Vec<f64>> = vec![Vec::new(); n.saturating_sub(1)];
        for l in 0..n {
            let (n_in, n_out) = self.layer_shape(l);
            let w = self.weights(l);
            let off = self.offsets[l];
            // v[l] = W_l^T u[l]
            let mut u_bar = vec![0.0; n_out];
            for i in 0..n_out {
                let row = &w[i * n_in..(i + 1) * n_in];
                u_bar[i] = dot(row, &v_bar);
                let ui = u[l][i];
                if ui != 0.0 {
                    let grow = &mut param_grad[off + i * n_in..off + (i + 1) * n_in];
                    for (gp, &vb) in grow.iter_mut().zip(&v_bar) {
                        *gp += ui * vb;
                    }
                }
            }
            if l + 1 < n {
                // u[l] = v[l+1] * act'(pre[l])
                let z = &cache.pre[l];
                let h = &cache.post[l + 1];
                let mut next_v_bar = vec![0.0; n_out];
                let mut zd = vec![0.0; n_out];
                for i in 0..n_out {
                    next_v_bar[i] = u_bar[i] * self.activation.first(z[i], h[i]);
                    zd[i] = u_bar[i] * v[l + 1][i] * self.activation.second(h[i]);
                }
                z_direct[l] = zd;
                v_bar = next_v_bar;
            }
        }

        // Push the pre-activation adjoints back through the forward pass.
        let mut h_bar: Option<Vec<f64>> = None;
        for l in (0..n.saturating_sub(1)).rev() {
            let (n_in, n_out) = self.layer_shape(l);
            let z = &cache.pre[l];
            let h = &cache.post[l + 1];
            let mut z_bar = std::mem::take(&mut z_direct[l]);
            if let Some(hb) = &h_bar {
                for i in 0..n_out {
                    z_bar[i] += hb[i] * self.activation.first(z[i], h[i]);
                }
            }
            let x = &cache.post[l];
            let off = self.offsets[l];
            for i in 0..n_out {
                let d = z_bar[i];
                if d != 0.0 {
                    let row = &mut param_grad[off + i * n_in..off + (i + 1) * n_in];
                    for (gp, &xj) in row.iter_mut().zip(x) {
                        *gp += d * xj;
                    }
                }
                param_grad[off + n_in * n_out + i] += d;
            }
            if l > 0 {
                h_bar = Some(transpose_mul(self.weights(l), &z_bar, n_in, n_out));
            }
        }
        Ok((penalty, g))
    }

    /// Lays the network out on `graph`. `inputs` and `params` are existing
    /// nodes (usually leaves); returns the output nodes.
    pub fn build_graph(
        &self,
        graph: &mut CompGraph,
        inputs: &[NodeId],
        params: &[NodeId],
    ) -> Result<Vec<NodeId>> {
        if inputs.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: inputs.len(),
            });
        }
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let mut h = inputs.to_vec();
        for l in 0..self.n_layers() {
            let (n_in, n_out) = self.layer_shape(l);
            let off = self.offsets[l];
            let mut next = Vec::with_capacity(n_out);
            for i in 0..n_out {
                let terms: Vec<NodeId> = (0..n_in)
                    .map(|j| graph.mul(params[off + i * n_in + j], h[j]))
                    .collect();
                let s = graph.sum(&terms);
                let z = graph.add(s, params[off + n_in * n_out + i]);
                next.push(if self.is_hidden(l) {
                    match self.activation {
                        Activation::Tanh => graph.tanh(z),
                        Activation::Relu => graph.relu(z),
                        Activation::Identity => z,
                    }
                } else {
                    z
                });
            }
            h = next;
        }
        Ok(h)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(i, &bi)| dot(&w[i * n_in..(i + 1) * n_in], x) + bi)
        .collect()
}

fn transpose_mul(w: &[f64], u: &[f64], n_in: usize, n_out: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_in];
    for i in 0..n_out {
        let ui = u[i];
        if ui == 0.0 {
            continue;
        }
        for (o, &wij) in out.iter_mut().zip(&w[i * n_in..(i + 1) * n_in]) {
            *o += wij * ui;
        }
    }
    out
}
