//! Scalar reverse-mode computation graph.
//!
//! A [`CompGraph`] is an append-only list of scalar operations. Operands
//! always refer to earlier nodes, so the node list is already a topological
//! order. The graph itself holds no numbers besides constants: evaluation
//! writes into a caller-owned [`Values`] buffer and reverse passes into a
//! caller-owned adjoint vector. A finished graph can therefore be shared
//! between threads (`CompGraph: Sync`) as long as each thread evaluates
//! into its own buffers; mutation requires `&mut` and is single-threaded.
//!
//! [`CompGraph::differentiate`] appends the adjoint computation itself as
//! new nodes. The resulting gradient nodes are ordinary graph nodes, so a
//! loss built from them (for example the squared 1-norm of an input
//! gradient) can be differentiated again with [`CompGraph::gradient`].

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    /// Leaf bound to `inputs[k]` at evaluation time.
    Input(usize),
    Const(f64),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Neg(NodeId),
    Tanh(NodeId),
    /// `max(x, 0)`; the subgradient at 0 is 0.
    Relu(NodeId),
    Exp(NodeId),
    Log(NodeId),
    Square(NodeId),
    /// `|x|`; the subgradient at 0 is 0.
    Abs(NodeId),
    /// `max(x, y)`; on ties the derivative flows to `y`.
    Max(NodeId, NodeId),
    /// Heaviside step `x > 0 ? 1 : 0`, treated as locally constant.
    Step(NodeId),
    /// `sign(x)` with `sign(0) = 0`, treated as locally constant.
    Sign(NodeId),
}

impl Op {
    fn operands(&self) -> (Option<NodeId>, Option<NodeId>) {
        use Op::*;
        match *self {
            Input(_) | Const(_) => (None, None),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Max(a, b) => (Some(a), Some(b)),
            Neg(a) | Tanh(a) | Relu(a) | Exp(a) | Log(a) | Square(a) | Abs(a) | Step(a)
            | Sign(a) => (Some(a), None),
        }
    }
}

pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn step(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Forward values of every node, indexed by [`NodeId`].
#[derive(Debug, Clone, PartialEq)]
pub struct Values(Vec<f64>);

impl Values {
    pub fn get(&self, id: NodeId) -> f64 {
        self.0[id.0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Default)]
pub struct CompGraph {
    ops: Vec<Op>,
    n_inputs: usize,
}

impl CompGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn op(&self, id: NodeId) -> Op {
        self.ops[id.0]
    }

    fn push(&mut self, op: Op) -> NodeId {
        let (a, b) = op.operands();
        let next = self.ops.len();
        debug_assert!(a.is_none_or(|a| a.0 < next) && b.is_none_or(|b| b.0 < next));
        self.ops.push(op);
        NodeId(next)
    }

    /// New leaf bound to the next slot of the evaluation input vector.
    pub fn input(&mut self) -> NodeId {
        let k = self.n_inputs;
        self.n_inputs += 1;
        self.push(Op::Input(k))
    }

    pub fn inputs(&mut self, n: usize) -> Vec<NodeId> {
        (0..n).map(|_| self.input()).collect()
    }

    pub fn constant(&mut self, c: f64) -> NodeId {
        self.push(Op::Const(c))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Mul(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Div(a, b))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Neg(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Relu(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Exp(a))
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Log(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Square(a))
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Abs(a))
    }

    pub fn max(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Max(a, b))
    }

    pub fn step(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Step(a))
    }

    pub fn sign(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Sign(a))
    }

    /// Left-to-right sum; a single constant zero node for an empty slice.
    pub fn sum(&mut self, terms: &[NodeId]) -> NodeId {
        match terms.split_first() {
            None => self.constant(0.0),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &t| self.add(acc, t)),
        }
    }

    /// Evaluates every node in insertion order.
    pub fn forward(&self, inputs: &[f64]) -> Result<Values> {
        if inputs.len() != self.n_inputs {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs,
                got: inputs.len(),
            });
        }
        let mut v: Vec<f64> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            use Op::*;
            let x = match *op {
                Input(k) => inputs[k],
                Const(c) => c,
                Add(a, b) => v[a.0] + v[b.0],
                Sub(a, b) => v[a.0] - v[b.0],
                Mul(a, b) => v[a.0] * v[b.0],
                Div(a, b) => v[a.0] / v[b.0],
                Neg(a) => -v[a.0],
                Tanh(a) => f64::tanh(v[a.0]),
                Relu(a) => v[a.0].max(0.0),
                Exp(a) => f64::exp(v[a.0]),
                Log(a) => f64::ln(v[a.0]),
                Square(a) => v[a.0] * v[a.0],
                Abs(a) => v[a.0].abs(),
                Max(a, b) => {
                    if v[a.0] > v[b.0] {
                        v[a.0]
                    } else {
                        v[b.0]
                    }
                }
                Step(a) => step(v[a.0]),
                Sign(a) => sign(v[a.0]),
            };
            v.push(x);
        }
        Ok(Values(v))
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.0 >= self.ops.len() {
            return Err(Error::Contract(format!(
                "node {} does not belong to a graph of {} nodes",
                id.0,
                self.ops.len()
            )));
        }
        Ok(())
    }

    /// Numeric reverse pass from a scalar `output` node. Returns the adjoint
    /// of every node up to and including `output`; later nodes are zero.
    pub fn backward(&self, values: &Values, output: NodeId) -> Result<Vec<f64>> {
        self.check(output)?;
        if values.0.len() != self.ops.len() {
            return Err(Error::Contract(
                "values were produced by a different graph".into(),
            ));
        }
        let v = &values.0;
        let mut adj = vec![0.0; self.ops.len()];
        adj[output.0] = 1.0;
        for i in (0..=output.0).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            use Op::*;
            match self.ops[i] {
                Input(_) | Const(_) | Step(_) | Sign(_) => {}
                Add(x, y) => {
                    adj[x.0] += a;
                    adj[y.0] += a;
                }
                Sub(x, y) => {
                    adj[x.0] += a;
                    adj[y.0] -= a;
                }
                Mul(x, y) => {
                    adj[x.0] += a * v[y.0];
                    adj[y.0] += a * v[x.0];
                }
                Div(x, y) => {
                    adj[x.0] += a / v[y.0];
                    adj[y.0] -= a * v[i] / v[y.0];
                }
                Neg(x) => adj[x.0] -= a,
                Tanh(x) => adj[x.0] += a * (1.0 - v[i] * v[i]),
                Relu(x) => adj[x.0] += a * step(v[x.0]),
                Exp(x) => adj[x.0] += a * v[i],
                Log(x) => adj[x.0] += a / v[x.0],
                Square(x) => adj[x.0] += a * 2.0 * v[x.0],
                Abs(x) => adj[x.0] += a * sign(v[x.0]),
                Max(x, y) => {
                    if v[x.0] > v[y.0] {
                        adj[x.0] += a;
                    } else {
                        adj[y.0] += a;
                    }
                }
            }
        }
        Ok(adj)
    }

    /// Gradient of scalar `output` with respect to the listed nodes.
    pub fn gradient(&self, values: &Values, output: NodeId, wrt: &[NodeId]) -> Result<Vec<f64>> {
        let adj = self.backward(values, output)?;
        wrt.iter()
            .map(|&w| {
                self.check(w)?;
                Ok(adj[w.0])
            })
            .collect()
    }

    /// Appends nodes computing d`output`/d`wrt` and returns them.
    ///
    /// The appended nodes use the same derivative rules as [`backward`]
    /// (including the zero subgradients of `relu`, `abs` and `max`), so at
    /// any point the new nodes evaluate to exactly what `gradient` returns
    /// up to floating-point association.
    ///
    /// [`backward`]: CompGraph::backward
    pub fn differentiate(&mut self, output: NodeId, wrt: &[NodeId]) -> Result<Vec<NodeId>> {
        self.check(output)?;
        for &w in wrt {
            self.check(w)?;
        }
        let mut adj: Vec<Option<NodeId>> = vec![None; output.0 + 1];
        adj[output.0] = Some(self.constant(1.0));

        fn accumulate(g: &mut CompGraph, adj: &mut [Option<NodeId>], target: NodeId, c: NodeId) {
            adj[target.0] = Some(match adj[target.0] {
                None => c,
                Some(prev) => g.add(prev, c),
            });
        }

        for i in (0..=output.0).rev() {
            let Some(a) = adj[i] else { continue };
            let node = NodeId(i);
            use Op::*;
            match self.ops[i] {
                Input(_) | Const(_) | Step(_) | Sign(_) => {}
                Add(x, y) => {
                    accumulate(self, &mut adj, x, a);
                    accumulate(self, &mut adj, y, a);
                }
                Sub(x, y) => {
                    accumulate(self, &mut adj, x, a);
                    let c = self.neg(a);
                    accumulate(self, &mut adj, y, c);
                }
                Mul(x, y) => {
                    let cx = self.mul(a, y);
                    accumulate(self, &mut adj, x, cx);
                    let cy = self.mul(a, x);
                    accumulate(self, &mut adj, y, cy);
                }
                Div(x, y) => {
                    let cx = self.div(a, y);
                    accumulate(self, &mut adj, x, cx);
                    let an = self.mul(a, node);
                    let q = self.div(an, y);
                    let cy = self.neg(q);
                    accumulate(self, &mut adj, y, cy);
                }
                Neg(x) => {
                    let c = self.neg(a);
                    accumulate(self, &mut adj, x, c);
                }
                Tanh(x) => {
                    let tt = self.square(node);
                    let one = self.constant(1.0);
                    let d = self.sub(one, tt);
                    let c = self.mul(a, d);
                    accumulate(self, &mut adj, x, c);
                }
                Relu(x) => {
                    let d = self.step(x);
                    let c = self.mul(a, d);
                    accumulate(self, &mut adj, x, c);
                }
                Exp(x) => {
                    let c = self.mul(a, node);
                    accumulate(self, &mut adj, x, c);
                }
                Log(x) => {
                    let c = self.div(a, x);
                    accumulate(self, &mut adj, x, c);
                }
                Square(x) => {
                    let two = self.constant(2.0);
                    let d = self.mul(two, x);
                    let c = self.mul(a, d);
                    accumulate(self, &mut adj, x, c);
                }
                Abs(x) => {
                    let d = self.sign(x);
                    let c = self.mul(a, d);
                    accumulate(self, &mut adj, x, c);
                }
                Max(x, y) => {
                    let diff = self.sub(x, y);
                    let mx = self.step(diff);
                    let one = self.constant(1.0);
                    let my = self.sub(one, mx);
                    let cx = self.mul(a, mx);
                    accumulate(self, &mut adj, x, cx);
                    let cy = self.mul(a, my);
                    accumulate(self, &mut adj, y, cy);
                }
            }
        }

        Ok(wrt
            .iter()
            .map(|&w| match adj.get(w.0).copied().flatten() {
                Some(n) => n,
                None => self.constant(0.0),
            })
            .collect())
    }
}
