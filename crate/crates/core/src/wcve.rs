//! Worst-case value estimation: minimizing a critic over an L∞ ball.
//!
//! Given a value function `V`, a state `s` and an [`UncertaintySet`] with
//! radius `epsilon` and a perturbation mask, each solver returns a point of
//! the box `{x : |x_i - s_i| <= epsilon on perturbable dims, x_i = s_i
//! elsewhere}` together with a (possibly approximate) value there:
//!
//! * [`pgd_solve`]: signed-gradient descent with projection onto the box.
//!   By default the lowest-valued iterate is returned; `strict_alg1`
//!   returns the last iterate instead.
//! * [`gbr_estimate`]: the first-order estimate `V(s) - epsilon ||grad||_1`.
//! * [`brute_solve`]: exhaustive grid search, the reference oracle.
//!
//! All solvers are pure functions of their arguments.

use serde::{Deserialize, Serialize};

use crate::diffcore::{sign, Mlp};
use crate::error::{Error, Result};

/// Largest grid [`brute_solve`] will evaluate.
pub const BRUTE_FORCE_BUDGET: u128 = 10_000_000;

/// A differentiable scalar function of the state.
pub trait ValueFunction: Sync {
    fn input_dim(&self) -> usize;
    fn value(&self, s: &[f64]) -> f64;
    fn value_and_grad(&self, s: &[f64]) -> (f64, Vec<f64>);
}

/// Scalar-output networks. The solvers check the input length before
/// calling in, so the network's own dimension errors cannot occur.
impl ValueFunction for Mlp {
    fn input_dim(&self) -> usize {
        Mlp::input_dim(self)
    }

    fn value(&self, s: &[f64]) -> f64 {
        Mlp::value(self, s).expect("scalar critic with matching input")
    }

    fn value_and_grad(&self, s: &[f64]) -> (f64, Vec<f64>) {
        self.value_and_input_grad(s)
            .expect("scalar critic with matching input")
    }
}

/// Closure-backed value function, mostly for tests and examples.
pub struct FnCritic<F, G> {
    dim: usize,
    f: F,
    grad: G,
}

impl<F, G> FnCritic<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    pub fn new(dim: usize, f: F, grad: G) -> Self {
        FnCritic { dim, f, grad }
    }
}

impl<F, G> ValueFunction for FnCritic<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn value(&self, s: &[f64]) -> f64 {
        (self.f)(s)
    }

    fn value_and_grad(&self, s: &[f64]) -> (f64, Vec<f64>) {
        ((self.f)(s), (self.grad)(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySet {
    /// L∞ radius, in the units of the critic's input.
    pub epsilon: f64,
    /// `true` marks a perturbable dimension; `None` perturbs all.
    #[serde(default)]
    pub mask: Option<Vec<bool>>,
    #[serde(default = "default_pgd_steps")]
    pub pgd_steps: usize,
    /// Defaults to `epsilon / pgd_steps`.
    #[serde(default)]
    pub pgd_step_size: Option<f64>,
    /// Return the final PGD iterate rather than the best one.
    #[serde(default)]
    pub strict_alg1: bool,
}

fn default_pgd_steps() -> usize {
    10
}

impl UncertaintySet {
    pub fn new(epsilon: f64) -> Self {
        UncertaintySet {
            epsilon,
            mask: None,
            pgd_steps: default_pgd_steps(),
            pgd_step_size: None,
            strict_alg1: false,
        }
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.pgd_steps = steps;
        self
    }

    pub fn step_size(&self) -> f64 {
        self.pgd_step_size
            .unwrap_or(self.epsilon / self.pgd_steps as f64)
    }

    pub fn perturbable(&self, i: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[i])
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be finite and non-negative, got {}",
                self.epsilon
            )));
        }
        if self.pgd_steps == 0 {
            return Err(Error::InvalidInput("pgd_steps must be positive".into()));
        }
        if let Some(a) = self.pgd_step_size {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "pgd_step_size must be positive, got {a}"
                )));
            }
        }
        if let Some(m) = &self.mask {
            if m.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.len(),
                });
            }
        }
        Ok(())
    }

    /// Per-dimension box `[lo, hi]` around `s`; masked dimensions collapse
    /// to `s_i`.
    pub fn bounds(&self, s: &[f64]) -> Vec<(f64, f64)> {
        s.iter()
            .enumerate()
            .map(|(i, &x)| {
                if self.perturbable(i) {
                    (x - self.epsilon, x + self.epsilon)
                } else {
                    (x, x)
                }
            })
            .collect()
    }

    pub fn contains(&self, s: &[f64], x: &[f64]) -> bool {
        x.len() == s.len()
            && self
                .bounds(s)
                .iter()
                .zip(x)
                .all(|(&(lo, hi), &xi)| lo <= xi && xi <= hi)
    }

    fn is_degenerate(&self, dim: usize) -> bool {
        self.epsilon == 0.0 || (0..dim).all(|i| !self.perturbable(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverTag {
    Pgd,
    Gbr,
    Brute,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WcveSolution {
    pub worst_state: Vec<f64>,
    pub worst_value: f64,
    pub solver_tag: SolverTag,
    /// Set when the solver hit a non-finite gradient and returned the
    /// unperturbed state instead.
    pub fell_back: bool,
}

impl WcveSolution {
    pub fn identity<V: ValueFunction + ?Sized>(v: &V, s: &[f64]) -> Self {
        WcveSolution {
            worst_state: s.to_vec(),
            worst_value: v.value(s),
            solver_tag: SolverTag::Identity,
            fell_back: false,
        }
    }

    fn fallback<V: ValueFunction + ?Sized>(v: &V, s: &[f64]) -> Self {
        WcveSolution {
            fell_back: true,
            ..Self::identity(v, s)
        }
    }
}

fn check_args<V: ValueFunction + ?Sized>(v: &V, s: &[f64], set: &UncertaintySet) -> Result<()> {
    if s.len() != v.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: v.input_dim(),
            got: s.len(),
        });
    }
    set.validate(s.len())
}

/// Worst-case state selection used during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Identity,
    Gbr,
    Pgd,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Identity => "identity",
            Solver::Gbr => "gbr",
            Solver::Pgd => "pgd",
        }
    }

    pub fn solve<V: ValueFunction + ?Sized>(
        self,
        v: &V,
        s: &[f64],
        set: &UncertaintySet,
    ) -> Result<WcveSolution> {
        match self {
            Solver::Identity => {
                check_args(v, s, set)?;
                Ok(WcveSolution::identity(v, s))
            }
            Solver::Gbr => gbr_estimate(v, s, set),
            Solver::Pgd => pgd_solve(v, s, set),
        }
    }
}

pub fn pgd_solve<V: ValueFunction + ?Sized>(
    v: &V,
    s: &[f64],
    set: &UncertaintySet,
) -> Result<WcveSolution> {
    check_args(v, s, set)?;
    if set.is_degenerate(s.len()) {
        return Ok(WcveSolution {
            solver_tag: SolverTag::Pgd,
            ..WcveSolution::identity(v, s)
        });
    }
    let bounds = set.bounds(s);
    let alpha = set.step_size();

    let mut current = s.to_vec();
    let (mut value, mut grad) = v.value_and_grad(&current);
    let mut best = (current.clone(), value);
    for i in 0..set.pgd_steps {
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Ok(WcveSolution::fallback(v, s));
        }
        for (j, x) in current.iter_mut().enumerate() {
            let (lo, hi) = bounds[j];
            if lo < hi {
                *x = (*x - alpha * sign(grad[j])).clamp(lo, hi);
            }
        }
        if i + 1 < set.pgd_steps {
            (value, grad) = v.value_and_grad(&current);
        } else {
            value = v.value(&current);
        }
        if value < best.1 {
            best = (current.clone(), value);
        }
    }
    if !value.is_finite() {
        return Ok(WcveSolution::fallback(v, s));
    }
    let (worst_state, worst_value) = if set.strict_alg1 {
        (current, value)
    } else {
        best
    };
    debug_assert!(set.contains(s, &worst_state));
    Ok(WcveSolution {
        worst_state,
        worst_value,
        solver_tag: SolverTag::Pgd,
        fell_back: false,
    })
}

pub fn gbr_estimate<V: ValueFunction + ?Sized>(
    v: &V,
    s: &[f64],
    set: &UncertaintySet,
) -> Result<WcveSolution> {
    check_args(v, s, set)?;
    let (value, grad) = v.value_and_grad(s);
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Ok(WcveSolution::fallback(v, s));
    }
    let bounds = set.bounds(s);
    let mut norm1 = 0.0;
    let mut worst_state = s.to_vec();
    for (j, x) in worst_state.iter_mut().enumerate() {
        if set.perturbable(j) {
            norm1 += grad[j].abs();
            let (lo, hi) = bounds[j];
            *x = (*x - set.epsilon * sign(grad[j])).clamp(lo, hi);
        }
    }
    Ok(WcveSolution {
        worst_state,
        worst_value: value - set.epsilon * norm1,
        solver_tag: SolverTag::Gbr,
        fell_back: false,
    })
}

/// Exhaustive minimum over `points_per_dim` evenly spaced values on every
/// perturbable dimension, scanned in row-major order (first dimension
/// slowest). Ties keep the first point scanned.
pub fn brute_solve<V: ValueFunction + ?Sized>(
    v: &V,
    s: &[f64],
    set: &UncertaintySet,
    points_per_dim: usize,
) -> Result<WcveSolution> {
    check_args(v, s, set)?;
    if points_per_dim == 0 {
        return Err(Error::InvalidInput("points_per_dim must be positive".into()));
    }
    if set.is_degenerate(s.len()) {
        return Ok(WcveSolution {
            solver_tag: SolverTag::Brute,
            ..WcveSolution::identity(v, s)
        });
    }
    let free: Vec<usize> = (0..s.len()).filter(|&i| set.perturbable(i)).collect();
    let required = (points_per_dim as u128).saturating_pow(free.len() as u32);
    if required > BRUTE_FORCE_BUDGET {
        return Err(Error::BudgetExceeded {
            required,
            limit: BRUTE_FORCE_BUDGET,
        });
    }
    let bounds = set.bounds(s);
    let coord = |dim: usize, k: usize| -> f64 {
        let (lo, hi) = bounds[dim];
        if points_per_dim == 1 {
            s[dim]
        } else if k + 1 == points_per_dim {
            hi
        } else {
            lo + (hi - lo) * k as f64 / (points_per_dim - 1) as f64
        }
    };

    let mut idx = vec![0usize; free.len()];
    let mut x = s.to_vec();
    let mut best: Option<(Vec<f64>, f64)> = None;
    loop {
        for (slot, &dim) in free.iter().enumerate() {
            x[dim] = coord(dim, idx[slot]);
        }
        let val = v.value(&x);
        if best.as_ref().is_none_or(|(_, b)| val < *b) {
            best = Some((x.clone(), val));
        }
        // odometer increment, last dimension fastest
        let mut d = free.len();
        loop {
            if d == 0 {
                let (worst_state, worst_value) = best.expect("at least one point");
                return Ok(WcveSolution {
                    worst_state,
                    worst_value,
                    solver_tag: SolverTag::Brute,
                    fell_back: false,
                });
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < points_per_dim {
                break;
            }
            idx[d] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq_norm() -> impl ValueFunction {
        FnCritic::new(
            2,
            |x: &[f64]| x.iter().map(|v| v * v).sum(),
            |x: &[f64]| x.iter().map(|v| 2.0 * v).collect(),
        )
    }

    #[test]
    fn pgd_reaches_corner_of_quadratic() {
        let v = sq_norm();
        let sol = pgd_solve(&v, &[0.5, 0.5], &UncertaintySet::new(0.1)).unwrap();
        for x in &sol.worst_state {
            assert!((x - 0.4).abs() < 1e-12);
        }
        assert!((sol.worst_value - 0.32).abs() < 1e-12);
        assert_eq!(sol.solver_tag, SolverTag::Pgd);
    }

    #[test]
    fn zero_radius_returns_input() {
        let v = sq_norm();
        let s = [0.3, -0.7];
        for sol in [
            pgd_solve(&v, &s, &UncertaintySet::new(0.0)).unwrap(),
            brute_solve(&v, &s, &UncertaintySet::new(0.0), 5).unwrap(),
        ] {
            assert_eq!(sol.worst_state, s.to_vec());
            assert_eq!(sol.worst_value, v.value(&s));
        }
    }

    #[test]
    fn fully_masked_returns_input() {
        let v = sq_norm();
        let set = UncertaintySet::new(0.5).with_mask(vec![false, false]);
        let sol = pgd_solve(&v, &[0.3, 0.2], &set).unwrap();
        assert_eq!(sol.worst_state, vec![0.3, 0.2]);
    }

    #[test]
    fn masked_dimension_is_fixed() {
        let v = sq_norm();
        let set = UncertaintySet::new(0.1).with_mask(vec![true, false]);
        for sol in [
            pgd_solve(&v, &[0.5, 0.5], &set).unwrap(),
            gbr_estimate(&v, &[0.5, 0.5], &set).unwrap(),
            brute_solve(&v, &[0.5, 0.5], &set, 11).unwrap(),
        ] {
            assert_eq!(sol.worst_state[1], 0.5);
            assert!((sol.worst_state[0] - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn gbr_on_concave_bowl_misses_curvature() {
        let v = FnCritic::new(1, |x: &[f64]| -x[0] * x[0], |x: &[f64]| vec![-2.0 * x[0]]);
        let set = UncertaintySet::new(0.1);
        let gbr = gbr_estimate(&v, &[0.0], &set).unwrap();
        let brute = brute_solve(&v, &[0.0], &set, 21).unwrap();
        assert_eq!(gbr.worst_value, 0.0);
        assert!((brute.worst_value + 0.01).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_falls_back() {
        let v = FnCritic::new(1, |x: &[f64]| x[0], |_: &[f64]| vec![f64::NAN]);
        let sol = pgd_solve(&v, &[1.0], &UncertaintySet::new(0.1)).unwrap();
        assert!(sol.fell_back);
        assert_eq!(sol.worst_state, vec![1.0]);
        assert_eq!(sol.solver_tag, SolverTag::Identity);
    }

    #[test]
    fn budget_is_enforced() {
        let v = FnCritic::new(8, |_: &[f64]| 0.0, |_: &[f64]| vec![0.0; 8]);
        let err = brute_solve(&v, &[0.0; 8], &UncertaintySet::new(0.1), 21).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn brute_ties_keep_first_point() {
        let v = FnCritic::new(1, |_: &[f64]| 1.0, |_: &[f64]| vec![0.0]);
        let sol = brute_solve(&v, &[0.0], &UncertaintySet::new(0.1), 3).unwrap();
        assert_eq!(sol.worst_state, vec![-0.1]);
    }

    #[test]
    fn strict_mode_returns_last_iterate() {
        // |x| from s = 0.05 with step 0.04: iterates 0.05 -> 0.01 -> -0.03 (best is 0.01)
        let v = FnCritic::new(1, |x: &[f64]| x[0].abs(), |x: &[f64]| vec![sign(x[0])]);
        let mut set = UncertaintySet::new(0.08).with_steps(2);
        set.pgd_step_size = Some(0.04);
        let best = pgd_solve(&v, &[0.05], &set).unwrap();
        set.strict_alg1 = true;
        let last = pgd_solve(&v, &[0.05], &set).unwrap();
        assert!((best.worst_state[0] - 0.01).abs() < 1e-15);
        assert!((last.worst_state[0] + 0.03).abs() < 1e-15);
        assert!(best.worst_value < last.worst_value);
    }

    #[test]
    fn invalid_sets_are_rejected() {
        let v = sq_norm();
        assert!(pgd_solve(&v, &[0.0, 0.0], &UncertaintySet::new(-1.0)).is_err());
        assert!(pgd_solve(&v, &[0.0, 0.0], &UncertaintySet::new(0.1).with_steps(0)).is_err());
        assert!(pgd_solve(&v, &[0.0], &UncertaintySet::new(0.1)).is_err());
        let masked = UncertaintySet::new(0.1).with_mask(vec![true]);
        assert!(pgd_solve(&v, &[0.0, 0.0], &masked).is_err());
    }
}
