//! Point spaces: closed scalar intervals and grid functions on [0, 1].

use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Two points closer than this (absolute difference for scalars, sup
/// difference for grid functions) are treated as equal.
pub const POINT_TOLERANCE: f64 = 1e-12;

pub trait Space: Clone + Debug + Send + Sync {
    type Point: Clone + Debug + Send + Sync + 'static;

    /// How far `p` lies outside the space; zero inside, infinite for
    /// malformed points.
    fn excess(&self, p: &Self::Point) -> f64;

    /// Separation used for point equality.
    fn separation(&self, a: &Self::Point, b: &Self::Point) -> f64;

    /// A scalar summary of a point for reports: the value, or the sup-norm.
    fn repr(&self, p: &Self::Point) -> f64;

    fn describe(&self) -> String;

    fn contains(&self, p: &Self::Point) -> bool {
        self.excess(p) <= 0.0
    }

    fn same_point(&self, a: &Self::Point, b: &Self::Point) -> bool {
        self.separation(a, b) <= POINT_TOLERANCE
    }

    fn check(&self, p: &Self::Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::Domain(format!("{p:?} not in {}", self.describe())))
        }
    }
}

/// A closed interval of the real line; bounds may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidInput(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn unit() -> Self {
        Interval { lo: 0.0, hi: 1.0 }
    }

    pub fn real_line() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    /// `n` equally spaced points including both ends.
    pub fn uniform_grid(&self, n: usize) -> Vec<f64> {
        linspace(self.lo, self.hi, n)
    }

    /// The default audit sample: a 41-point grid plus 0, 1/3 and 1/2 when
    /// they fall inside the interval.
    pub fn default_sample(&self) -> Vec<f64> {
        self.sample_with(41, &[0.0, 1.0 / 3.0, 0.5])
    }

    /// A uniform grid of `n` points merged with `extra`, sorted, without
    /// duplicates (within [`POINT_TOLERANCE`]). Extra points outside the
    /// interval are dropped.
    pub fn sample_with(&self, n: usize, extra: &[f64]) -> Vec<f64> {
        let mut pts = if n == 0 { Vec::new() } else { self.uniform_grid(n) };
        pts.extend(extra.iter().copied().filter(|p| self.contains(p)));
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= POINT_TOLERANCE);
        pts
    }

    /// `n` seeded uniform draws from the interval (which must be bounded).
    pub fn random_points(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| self.lo + (self.hi - self.lo) * rng.gen::<f64>())
            .collect()
    }
}

impl Space for Interval {
    type Point = f64;

    fn excess(&self, p: &f64) -> f64 {
        if !p.is_finite() {
            f64::INFINITY
        } else if *p < self.lo {
            self.lo - p
        } else if *p > self.hi {
            p - self.hi
        } else {
            0.0
        }
    }

    fn separation(&self, a: &f64, b: &f64) -> f64 {
        (a - b).abs()
    }

    fn repr(&self, p: &f64) -> f64 {
        *p
    }

    fn describe(&self) -> String {
        format!("[{}, {}]", self.lo, self.hi)
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// `n` points equally spaced in log scale from `lo` to `hi` (both > 0).
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut pts: Vec<f64> = linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect();
    if let Some(first) = pts.first_mut() {
        *first = lo;
    }
    if let Some(last) = pts.last_mut() {
        *last = hi;
    }
    pts
}

/// Values of a function on the uniform grid t_i = i/(n-1) over [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    /// The node count must be odd and at least 3.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate_node_count(values.len())?;
        Ok(GridFunction { values })
    }

    pub fn from_fn(n_nodes: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        validate_node_count(n_nodes)?;
        Ok(GridFunction {
            values: grid_nodes(n_nodes).into_iter().map(f).collect(),
        })
    }

    pub fn try_from_fn(n_nodes: usize, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        validate_node_count(n_nodes)?;
        let values = grid_nodes(n_nodes).into_iter().map(f).collect::<Result<_>>()?;
        Ok(GridFunction { values })
    }

    pub fn zeros(n_nodes: usize) -> Result<Self> {
        Self::from_fn(n_nodes, |_| 0.0)
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nodes(&self) -> Vec<f64> {
        grid_nodes(self.values.len())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        if self.n_nodes() != other.n_nodes() {
            return Err(Error::ShapeMismatch {
                left: self.n_nodes(),
                right: other.n_nodes(),
            });
        }
        Ok(sup_diff(&self.values, &other.values))
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn validate_node_count(n: usize) -> Result<()> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::validation(
            "n_nodes",
            format!("must be odd and at least 3, got {n}"),
        ));
    }
    Ok(())
}

/// t_i = i/(n-1), i = 0..n.
pub fn grid_nodes(n: usize) -> Vec<f64> {
    linspace(0.0, 1.0, n)
}

/// Grid functions with a fixed node count, optionally bounded in sup-norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpace {
    pub n_nodes: usize,
    pub bound: f64,
}

impl GridSpace {
    pub fn new(n_nodes: usize) -> Result<Self> {
        validate_node_count(n_nodes)?;
        Ok(GridSpace {
            n_nodes,
            bound: f64::INFINITY,
        })
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = bound;
        self
    }

    /// Seeded smooth random functions a + b t + c sin(k pi t), rescaled so
    /// that the sup-norm does not exceed `amplitude`.
    pub fn random_functions(&self, count: usize, seed: u64, amplitude: f64) -> Vec<GridFunction> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = grid_nodes(self.n_nodes);
        (0..count)
            .map(|_| {
                let a: f64 = rng.gen_range(-1.0..1.0);
                let b: f64 = rng.gen_range(-1.0..1.0);
                let c: f64 = rng.gen_range(-1.0..1.0);
                let k = rng.gen_range(1..=4) as f64;
                let mut values: Vec<f64> = nodes
                    .iter()
                    .map(|&t| a + b * t + c * (k * std::f64::consts::PI * t).sin())
                    .collect();
                let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if sup > amplitude {
                    let s = amplitude / sup;
                    values.iter_mut().for_each(|v| *v *= s);
                }
                GridFunction { values }
            })
            .collect()
    }
}

impl Space for GridSpace {
    type Point = GridFunction;

    fn excess(&self, p: &GridFunction) -> f64 {
        if p.n_nodes() != self.n_nodes || p.values.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        (p.sup_norm() - self.bound).max(0.0)
    }

    fn separation(&self, a: &GridFunction, b: &GridFunction) -> f64 {
        if a.n_nodes() != b.n_nodes() {
            return f64::INFINITY;
        }
        sup_diff(&a.values, &b.values)
    }

    fn repr(&self, p: &GridFunction) -> f64 {
        p.sup_norm()
    }

    fn describe(&self) -> String {
        format!("grid functions on {} nodes", self.n_nodes)
    }
}
