//! `-u'' = f(t, u)`, `u(0) = u(1) = 0`, solved as the fixed point of
//! `(T u)(t) = int_0^1 G(t, s) f(s, u(s)) ds` on grid functions.
//!
//! The quadrature is product integration: `f(s, u(s))` is interpolated by
//! quadratics on the Simpson panels `[s_{2k}, s_{2k+2}]` and multiplied by
//! the exact Green's function, which is integrated piecewise with the
//! panel split at `s = t`. The kink of `G` at `s = t` therefore costs no
//! accuracy. Rows for `t = 0` and `t = 1` are identically zero.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::audit::{Axiom, AxiomReport, Violation};
use crate::error::{Error, Result};
use crate::expr::Formula;
use crate::gauge::FGauge;
use crate::iteration::{iterate, IterationTrace};
use crate::map::SelfMap;
use crate::metric::PerturbedMetric;
use crate::space::{grid_nodes, linspace, validate_node_count, GridFunction, GridSpace};

pub const DEFAULT_NODES: usize = 201;

pub type Rhs = Arc<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>;

/// Right-hand side `f(s, u)` with the contraction exponent `tau`; the target
/// Lipschitz bound in `u` is `exp(-tau)`.
#[derive(Clone)]
pub struct BvpProblem {
    rhs: Rhs,
    tau: f64,
}

impl fmt::Debug for BvpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BvpProblem")
            .field("tau", &self.tau)
            .finish_non_exhaustive()
    }
}

impl BvpProblem {
    pub fn new(rhs: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, tau: f64) -> Result<Self> {
        Self::from_fallible(Arc::new(move |s, u| Ok(rhs(s, u))), tau)
    }

    pub fn from_fallible(rhs: Rhs, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::validation("tau", format!("must be positive, got {tau}")));
        }
        Ok(BvpProblem { rhs, tau })
    }

    /// `f` given as a formula over `(s, u)`.
    pub fn from_formula(formula: Formula, tau: f64) -> Result<Self> {
        Self::from_fallible(Arc::new(move |s, u| formula.eval(&[s, u])), tau)
    }

    /// f(s, u) = ((s + 0.5)/2) sin u, whose unique solution is u = 0.
    pub fn damped_sine(tau: f64) -> Result<Self> {
        Self::new(|s, u| 0.5 * (s + 0.5) * u.sin(), tau)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn lipschitz_bound(&self) -> f64 {
        (-self.tau).exp()
    }

    pub fn rhs(&self, s: f64, u: f64) -> Result<f64> {
        (self.rhs)(s, u)
    }
}

/// Green's function of `-u''` with homogeneous Dirichlet conditions:
/// `s (1 - t)` for `s <= t`, `t (1 - s)` otherwise.
pub fn green_kernel(t: f64, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("({t}, {s}) outside the unit square")));
    }
    Ok(green(t, s))
}

fn green(t: f64, s: f64) -> f64 {
    if s <= t {
        s * (1.0 - t)
    } else {
        t * (1.0 - s)
    }
}

/// Product-integration weights `w_j` with
/// `int_0^1 G(t, s) phi(s) ds ~ sum_j w_j phi(s_j)`.
fn row_weights(t: f64, n_nodes: usize) -> Vec<f64> {
    let mut w = vec![0.0; n_nodes];
    if t <= 0.0 || t >= 1.0 {
        return w;
    }
    let h = 1.0 / (n_nodes - 1) as f64;
    let g = 1.0 / 3f64.sqrt();
    for k in 0..(n_nodes - 1) / 2 {
        let j = 2 * k;
        let a = j as f64 * h;
        let b = if j + 2 == n_nodes - 1 { 1.0 } else { (j + 2) as f64 * h };
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut piece = |p: f64, q: f64| {
            let c = 0.5 * (p + q);
            let r = 0.5 * (q - p);
            for s in [c - r * g, c + r * g] {
                let xi = (s - mid) / half;
                let gw = r * green(t, s);
                w[j] += gw * 0.5 * xi * (xi - 1.0);
                w[j + 1] += gw * (1.0 - xi * xi);
                w[j + 2] += gw * 0.5 * xi * (xi + 1.0);
            }
        };
        if a < t && t < b {
            piece(a, t);
            piece(t, b);
        } else {
            piece(a, b);
        }
    }
    w
}

/// `int_0^1 G(t, s) ds` by the operator's quadrature on `n_nodes` nodes.
/// The closed form is `t (1 - t) / 2`.
pub fn kernel_row_integral(t: f64, n_nodes: usize) -> Result<f64> {
    green_kernel(t, 0.0)?;
    validate_node_count(n_nodes)?;
    Ok(row_weights(t, n_nodes).iter().sum())
}

/// The discretized integral operator on a fixed grid.
#[derive(Debug, Clone)]
pub struct GreenOperator {
    n_nodes: usize,
    /// Row-major `n_nodes x n_nodes`.
    weights: Vec<f64>,
}

impl GreenOperator {
    pub fn new(n_nodes: usize) -> Result<Self> {
        validate_node_count(n_nodes)?;
        let weights = grid_nodes(n_nodes)
            .par_iter()
            .flat_map_iter(|&t| row_weights(t, n_nodes))
            .collect();
        Ok(GreenOperator { n_nodes, weights })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n_nodes..(i + 1) * self.n_nodes]
    }

    /// `(T u)_i = sum_j W_ij f(s_j, u_j)`; the boundary values are exactly 0.
    pub fn apply(&self, u: &GridFunction, problem: &BvpProblem) -> Result<GridFunction> {
        if u.n_nodes() != self.n_nodes {
            return Err(Error::ShapeMismatch {
                left: u.n_nodes(),
                right: self.n_nodes,
            });
        }
        let nodes = grid_nodes(self.n_nodes);
        let phi = nodes
            .iter()
            .zip(u.values())
            .enumerate()
            .map(|(j, (&s, &v))| {
                let value = problem.rhs(s, v)?;
                if value.is_finite() {
                    Ok(value)
                } else {
                    Err(Error::NonFiniteValue { node: j, value })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        self.integrate(&phi)
    }

    /// `sum_j W_ij phi_j` for every row.
    pub fn integrate(&self, phi: &[f64]) -> Result<GridFunction> {
        let last = self.n_nodes - 1;
        let values = (0..self.n_nodes)
            .into_par_iter()
            .map(|i| {
                if i == 0 || i == last {
                    0.0
                } else {
                    self.row(i).iter().zip(phi).map(|(w, p)| w * p).sum()
                }
            })
            .collect();
        GridFunction::new(values)
    }
}

/// Applies the integral operator on `u`'s grid.
pub fn apply_operator(u: &GridFunction, problem: &BvpProblem) -> Result<GridFunction> {
    GreenOperator::new(u.n_nodes())?.apply(u, problem)
}

/// `D(u1, u2) = max |u1 - u2| + |u1(0) - u2(0)|` with perturbation
/// `|u1(0) - u2(0)|`; the exact part is the sup distance.
pub fn function_metric(n_nodes: usize) -> Result<PerturbedMetric<GridSpace>> {
    Ok(PerturbedMetric::from_fallible(
        GridSpace::new(n_nodes)?,
        Arc::new(function_metric_D),
        Arc::new(|a: &GridFunction, b: &GridFunction| Ok((a.values()[0] - b.values()[0]).abs())),
    ))
}

#[allow(non_snake_case)]
pub fn function_metric_D(u1: &GridFunction, u2: &GridFunction) -> Result<f64> {
    Ok(u1.sup_distance(u2)? + (u1.values()[0] - u2.values()[0]).abs())
}

/// The `T` of the problem as a self-map of grid functions.
pub fn operator_map(problem: &BvpProblem, n_nodes: usize) -> Result<SelfMap<GridSpace>> {
    let op = GreenOperator::new(n_nodes)?;
    let problem = problem.clone();
    Ok(SelfMap::from_fallible(
        GridSpace::new(n_nodes)?,
        Arc::new(move |u: &GridFunction| op.apply(u, &problem)),
    ))
}

/// Grid samples `(s, u1, u2)` with `u1 < u2` from `u_range`, checking
/// `|f(s,u1) - f(s,u2)| <= exp(-tau) |u1 - u2|`. Only the worst violating
/// triple is reported.
pub fn lipschitz_audit(problem: &BvpProblem, u_range: (f64, f64), n_samples: usize) -> Result<AxiomReport> {
    let scan = slope_scan(problem, u_range, n_samples)?;
    let bound = problem.lipschitz_bound();
    let mut violations = Vec::new();
    if let Some((s, u1, u2, lhs)) = scan.worst {
        let rhs = bound * (u2 - u1);
        if lhs > rhs + 1e-12 {
            violations.push(Violation::new(Axiom::Lipschitz, vec![], vec![s, u1, u2], lhs, rhs));
        }
    }
    Ok(AxiomReport::from_violations(violations, scan.triples))
}

/// Largest sampled difference quotient `|f(s,u1) - f(s,u2)| / |u1 - u2|`.
pub fn observed_lipschitz(problem: &BvpProblem, u_range: (f64, f64), n_samples: usize) -> Result<f64> {
    Ok(slope_scan(problem, u_range, n_samples)?.max_slope)
}

/// `-ln` of the observed Lipschitz constant: the largest tau for which the
/// sampled bound `exp(-tau)` holds. `None` when `f` does not depend on `u`.
pub fn admissible_tau(problem: &BvpProblem, u_range: (f64, f64), n_samples: usize) -> Result<Option<f64>> {
    let slope = observed_lipschitz(problem, u_range, n_samples)?;
    Ok((slope > 0.0).then(|| -slope.ln()))
}

struct SlopeScan {
    max_slope: f64,
    /// (s, u1, u2, |f1 - f2|) with the largest excess over the bound
    worst: Option<(f64, f64, f64, f64)>,
    triples: usize,
}

fn slope_scan(problem: &BvpProblem, u_range: (f64, f64), n_samples: usize) -> Result<SlopeScan> {
    if n_samples < 2 {
        return Err(Error::validation("n_samples", "must be at least 2"));
    }
    let (lo, hi) = u_range;
    if !(lo < hi) {
        return Err(Error::validation("u_range", format!("empty range [{lo}, {hi}]")));
    }
    let bound = problem.lipschitz_bound();
    let us = linspace(lo, hi, n_samples);
    let mut scan = SlopeScan {
        max_slope: 0.0,
        worst: None,
        triples: 0,
    };
    let mut worst_excess = f64::NEG_INFINITY;
    for s in linspace(0.0, 1.0, n_samples) {
        let fs = us.iter().map(|&u| problem.rhs(s, u)).collect::<Result<Vec<_>>>()?;
        for i in 0..us.len() {
            for j in i + 1..us.len() {
                let diff = (fs[i] - fs[j]).abs();
                let du = us[j] - us[i];
                scan.triples += 1;
                scan.max_slope = scan.max_slope.max(diff / du);
                let excess = diff - bound * du;
                if excess > worst_excess {
                    worst_excess = excess;
                    scan.worst = Some((s, us[i], us[j], diff));
                }
            }
        }
    }
    Ok(scan)
}

/// Picard iteration of the integral operator from `u0` in the
/// function-space perturbed metric. F(gamma_n) is recorded with F = ln.
pub fn solve_bvp(
    problem: &BvpProblem,
    u0: &GridFunction,
    tol: f64,
    max_iters: usize,
) -> Result<(GridFunction, IterationTrace<GridFunction>)> {
    let n = u0.n_nodes();
    let map = operator_map(problem, n)?;
    let metric = function_metric(n)?;
    let trace = iterate(&map, u0, &metric, tol, max_iters, Some(&FGauge::ln()))?;
    Ok((trace.last().clone(), trace))
}

/// `max_i |-(u_{i-1} - 2u_i + u_{i+1})/h^2 - f(t_i, u_i)| + |u_0| + |u_N|`.
pub fn residual_check(u: &GridFunction, problem: &BvpProblem) -> Result<f64> {
    let n = u.n_nodes();
    if n < 5 {
        return Err(Error::InsufficientData(format!("residual needs 5 nodes, got {n}")));
    }
    let h = u.spacing();
    let v = u.values();
    let nodes = u.nodes();
    let mut worst: f64 = 0.0;
    for i in 1..n - 1 {
        let second = (v[i - 1] - 2.0 * v[i] + v[i + 1]) / (h * h);
        worst = worst.max((-second - problem.rhs(nodes[i], v[i])?).abs());
    }
    Ok(worst + v[0].abs() + v[n - 1].abs())
}

/// Solution export row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolutionPoint {
    pub t: f64,
    pub u: f64,
}

pub fn solution_points(u: &GridFunction) -> Vec<SolutionPoint> {
    u.nodes()
        .into_iter()
        .zip(u.values())
        .map(|(t, &u)| SolutionPoint { t, u })
        .collect()
}
