//! Perturbed metrics D = d + P: evaluation of the exact metric, sampled axiom
//! audits and the averaging/scaling constructions.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::audit::{Axiom, AxiomReport, Violation};
use crate::error::{Error, Result};
use crate::expr::Formula;
use crate::space::{Interval, Space};

/// Default slack for the triangle inequality and the other metric axioms.
pub const AXIOM_TOLERANCE: f64 = 1e-10;

pub type PairFn<P> = Arc<dyn Fn(&P, &P) -> Result<f64> + Send + Sync>;

/// A distance `D` on a space together with a perturbation `P` such that
/// `d = D - P` is meant to be a metric.
#[derive(Clone)]
pub struct PerturbedMetric<S: Space> {
    space: S,
    distance: PairFn<S::Point>,
    perturbation: PairFn<S::Point>,
    tolerance: f64,
}

impl<S: Space> fmt::Debug for PerturbedMetric<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerturbedMetric")
            .field("space", &self.space)
            .field("tolerance", &self.tolerance)
            .finish_non_exhaustive()
    }
}

impl<S: Space> PerturbedMetric<S> {
    pub fn new<D, P>(space: S, distance: D, perturbation: P) -> Self
    where
        D: Fn(&S::Point, &S::Point) -> f64 + Send + Sync + 'static,
        P: Fn(&S::Point, &S::Point) -> f64 + Send + Sync + 'static,
    {
        Self::from_fallible(
            space,
            Arc::new(move |x, y| Ok(distance(x, y))),
            Arc::new(move |x, y| Ok(perturbation(x, y))),
        )
    }

    pub fn from_fallible(space: S, distance: PairFn<S::Point>, perturbation: PairFn<S::Point>) -> Self {
        PerturbedMetric {
            space,
            distance,
            perturbation,
            tolerance: AXIOM_TOLERANCE,
        }
    }

    /// Treats `distance` itself as the exact metric (zero perturbation).
    pub fn unperturbed<D>(space: S, distance: D) -> Self
    where
        D: Fn(&S::Point, &S::Point) -> f64 + Send + Sync + 'static,
    {
        Self::new(space, distance, |_, _| 0.0)
    }

    /// Slack allowed before `D - P < 0` is reported as an error.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn space(&self) -> &S {
        &self.space
    }

    pub fn distance_fn(&self) -> &PairFn<S::Point> {
        &self.distance
    }

    pub fn perturbation_fn(&self) -> &PairFn<S::Point> {
        &self.perturbation
    }

    fn check_pair(&self, x: &S::Point, y: &S::Point) -> Result<()> {
        self.space.check(x)?;
        self.space.check(y)
    }

    pub fn distance(&self, x: &S::Point, y: &S::Point) -> Result<f64> {
        self.check_pair(x, y)?;
        (self.distance)(x, y)
    }

    pub fn perturbation(&self, x: &S::Point, y: &S::Point) -> Result<f64> {
        self.check_pair(x, y)?;
        (self.perturbation)(x, y)
    }

    /// `(D(x, y), P(x, y))`.
    pub fn parts(&self, x: &S::Point, y: &S::Point) -> Result<(f64, f64)> {
        self.check_pair(x, y)?;
        Ok(((self.distance)(x, y)?, (self.perturbation)(x, y)?))
    }

    /// The exact metric `D(x, y) - P(x, y)`. Values within the tolerance
    /// below zero are clamped to zero.
    pub fn exact(&self, x: &S::Point, y: &S::Point) -> Result<f64> {
        let (d, p) = self.parts(x, y)?;
        exact_from_parts(d, p, self.tolerance)
    }
}

fn exact_from_parts(d: f64, p: f64, tolerance: f64) -> Result<f64> {
    let value = d - p;
    if value < -tolerance || value.is_nan() {
        return Err(Error::NegativeExactDistance { d, p, value });
    }
    Ok(value.max(0.0))
}

impl PerturbedMetric<Interval> {
    /// Builds a scalar metric from formulas over the variables `x, y`.
    pub fn from_formulas(domain: Interval, distance: Formula, perturbation: Formula) -> Self {
        Self::from_fallible(
            domain,
            Arc::new(move |x: &f64, y: &f64| distance.eval(&[*x, *y])),
            Arc::new(move |x: &f64, y: &f64| perturbation.eval(&[*x, *y])),
        )
    }

    /// D(x, y) = |x - y| + x^2 y^4 on the real line with P(x, y) = x^2 y^4;
    /// the exact metric is |x - y|.
    pub fn product_perturbed() -> Self {
        Self::new(
            Interval::real_line(),
            |x, y| (x - y).abs() + x * x * y.powi(4),
            |x, y| x * x * y.powi(4),
        )
    }

    /// D(x, y) = |x - y| + (x - y)^4 on [0, 1] with P(x, y) = (x - y)^4.
    /// `D` itself violates the triangle inequality.
    pub fn quartic_perturbed() -> Self {
        Self::new(
            Interval::unit(),
            |x, y| (x - y).abs() + (x - y).powi(4),
            |x, y| (x - y).powi(4),
        )
    }

    /// D(x, y) = |x - y| + (x - y)^2 on [0, 1] with P(x, y) = (x - y)^2.
    pub fn quadratic_perturbed() -> Self {
        Self::new(
            Interval::unit(),
            |x, y| (x - y).abs() + (x - y).powi(2),
            |x, y| (x - y).powi(2),
        )
    }
}

/// `D(x, y) - P(x, y)`, failing when the difference is negative beyond the
/// metric's tolerance.
pub fn eval_exact<S: Space>(m: &PerturbedMetric<S>, x: &S::Point, y: &S::Point) -> Result<f64> {
    m.exact(x, y)
}

struct PairTable {
    n: usize,
    distance: Vec<f64>,
    perturbation: Vec<f64>,
}

impl PairTable {
    fn build<S: Space>(m: &PerturbedMetric<S>, sample: &[S::Point]) -> Result<Self> {
        for p in sample {
            m.space.check(p)?;
        }
        let n = sample.len();
        let rows: Vec<Vec<(f64, f64)>> = sample
            .par_iter()
            .map(|x| {
                sample
                    .iter()
                    .map(|y| Ok(((m.distance)(x, y)?, (m.perturbation)(x, y)?)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let (distance, perturbation) = rows.into_iter().flatten().unzip();
        Ok(PairTable {
            n,
            distance,
            perturbation,
        })
    }

    fn d(&self, i: usize, j: usize) -> f64 {
        self.distance[i * self.n + j]
    }

    fn p(&self, i: usize, j: usize) -> f64 {
        self.perturbation[i * self.n + j]
    }

    fn exact(&self, i: usize, j: usize) -> f64 {
        self.d(i, j) - self.p(i, j)
    }
}

/// Checks (P1)-(P4) for `d = D - P`, plus `D >= 0` and `P >= 0`, on every
/// pair and ordered triple of `sample`. Violations must exceed `tol`.
pub fn audit_axioms<S: Space>(m: &PerturbedMetric<S>, sample: &[S::Point], tol: f64) -> Result<AxiomReport> {
    if sample.is_empty() {
        return Err(Error::InvalidInput("empty audit sample".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be >= 0, got {tol}")));
    }
    let table = PairTable::build(m, sample)?;
    let n = sample.len();
    let repr: Vec<f64> = sample.iter().map(|p| m.space.repr(p)).collect();
    let pts = |idx: &[usize]| idx.iter().map(|&i| repr[i]).collect::<Vec<_>>();

    let mut violations = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (big, pert, d) = (table.d(i, j), table.p(i, j), table.exact(i, j));
            if -big > tol {
                violations.push(Violation::new(
                    Axiom::DistanceNonNegative,
                    vec![i, j],
                    pts(&[i, j]),
                    0.0,
                    big,
                ));
            }
            if -pert > tol {
                violations.push(Violation::new(
                    Axiom::PerturbationNonNegative,
                    vec![i, j],
                    pts(&[i, j]),
                    0.0,
                    pert,
                ));
            }
            if -d > tol {
                violations.push(Violation::new(Axiom::P1, vec![i, j], pts(&[i, j]), 0.0, d));
            }
            let sep = m.space.separation(&sample[i], &sample[j]);
            if m.space.same_point(&sample[i], &sample[j]) {
                if d > tol {
                    violations.push(Violation::new(Axiom::P2, vec![i, j], pts(&[i, j]), d, 0.0));
                }
            } else if d <= tol && sep - d > tol {
                violations.push(Violation::new(Axiom::P2, vec![i, j], pts(&[i, j]), sep, d));
            }
            if j > i {
                let back = table.exact(j, i);
                if (d - back).abs() > tol {
                    let (lhs, rhs) = if d >= back { (d, back) } else { (back, d) };
                    violations.push(Violation::new(Axiom::P3, vec![i, j], pts(&[i, j]), lhs, rhs));
                }
            }
        }
    }

    let triangle: Vec<Violation> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let table = &table;
            let pts = &pts;
            (0..n).flat_map(move |j| {
                (0..n).filter_map(move |k| {
                    let lhs = table.exact(i, j);
                    let rhs = table.exact(i, k) + table.exact(k, j);
                    (lhs - rhs > tol).then(|| Violation::new(Axiom::P4, vec![i, j, k], pts(&[i, j, k]), lhs, rhs))
                })
            })
        })
        .collect();
    violations.extend(triangle);

    Ok(AxiomReport::from_violations(violations, n))
}

/// A triple where `D(x, y) > D(x, z) + D(z, y)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TriangleWitness<P> {
    /// Sample indices of x, y, z.
    pub indices: [usize; 3],
    pub x: P,
    pub y: P,
    pub z: P,
    /// D(x, y)
    pub lhs: f64,
    /// D(x, z) + D(z, y)
    pub rhs: f64,
    pub gap: f64,
}

/// Searches all ordered triples of `sample` for the largest triangle excess
/// `D(x, y) - D(x, z) - D(z, y)`. Returns it if it exceeds `tol`. Among
/// (numerically) tied maxima the lexicographically first index triple wins.
pub fn find_triangle_violation<P, D>(distance: D, sample: &[P], tol: f64) -> Result<Option<TriangleWitness<P>>>
where
    P: Clone + Sync,
    D: Fn(&P, &P) -> Result<f64> + Sync,
{
    let n = sample.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "triangle search needs at least 3 points, got {n}"
        )));
    }
    let table: Vec<f64> = sample
        .par_iter()
        .map(|x| sample.iter().map(|y| distance(x, y)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?
        .concat();
    let at = |i: usize, j: usize| table[i * n + j];

    // Per-row maxima in parallel, then an ordered reduction so that ties
    // resolve to the smallest index triple.
    let row_best: Vec<Option<(f64, [usize; 3])>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best: Option<(f64, [usize; 3])> = None;
            for j in 0..n {
                for k in 0..n {
                    let gap = at(i, j) - (at(i, k) + at(k, j));
                    if improves(gap, best.map(|b| b.0)) {
                        best = Some((gap, [i, j, k]));
                    }
                }
            }
            best
        })
        .collect();
    let mut best: Option<(f64, [usize; 3])> = None;
    for candidate in row_best.into_iter().flatten() {
        if improves(candidate.0, best.map(|b| b.0)) {
            best = Some(candidate);
        }
    }

    Ok(best
        .filter(|(gap, _)| *gap > tol)
        .map(|(gap, [i, j, k])| TriangleWitness {
            indices: [i, j, k],
            x: sample[i].clone(),
            y: sample[j].clone(),
            z: sample[k].clone(),
            lhs: at(i, j),
            rhs: at(i, k) + at(k, j),
            gap,
        }))
}

fn improves(gap: f64, best: Option<f64>) -> bool {
    match best {
        None => true,
        Some(b) => gap > b + 4.0 * f64::EPSILON * b.abs().max(1.0),
    }
}

/// Given `(X, D, P)` and `(X, D, Q)`, builds `(X, D, (P + Q)/2)`. The two
/// base distances must agree on every pair of `sample` within `tol`.
pub fn average_perturbations<S: Space>(
    m1: &PerturbedMetric<S>,
    m2: &PerturbedMetric<S>,
    sample: &[S::Point],
    tol: f64,
) -> Result<PerturbedMetric<S>> {
    for x in sample {
        for y in sample {
            let left = m1.distance(x, y)?;
            let right = m2.distance(x, y)?;
            if (left - right).abs() > tol || left.is_nan() != right.is_nan() {
                return Err(Error::MismatchedBase {
                    x: m1.space.repr(x),
                    y: m1.space.repr(y),
                    left,
                    right,
                });
            }
        }
    }
    let p1 = m1.perturbation.clone();
    let p2 = m2.perturbation.clone();
    Ok(PerturbedMetric {
        space: m1.space.clone(),
        distance: m1.distance.clone(),
        perturbation: Arc::new(move |x, y| Ok(0.5 * (p1(x, y)? + p2(x, y)?))),
        tolerance: m1.tolerance.max(m2.tolerance),
    })
}

/// `(X, alpha D, alpha P)` for `alpha > 0`.
pub fn scale<S: Space>(alpha: f64, m: &PerturbedMetric<S>) -> Result<PerturbedMetric<S>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidScale(alpha));
    }
    let d = m.distance.clone();
    let p = m.perturbation.clone();
    Ok(PerturbedMetric {
        space: m.space.clone(),
        distance: Arc::new(move |x, y| Ok(alpha * d(x, y)?)),
        perturbation: Arc::new(move |x, y| Ok(alpha * p(x, y)?)),
        tolerance: m.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn witness_triple() -> Vec<f64> {
        vec![0.0, 1.0 / 3.0, 0.5]
    }

    #[test]
    fn exact_metric_of_product_perturbation() {
        let m = PerturbedMetric::product_perturbed();
        assert_eq!(eval_exact(&m, &1.0, &2.0).unwrap(), 1.0);
        assert_eq!(eval_exact(&m, &-3.5, &-3.5).unwrap(), 0.0);
    }

    #[test]
    fn exact_metric_of_quartic_perturbation() {
        let m = PerturbedMetric::quartic_perturbed();
        assert_eq!(m.distance(&0.0, &0.5).unwrap(), 0.5625);
        assert_eq!(eval_exact(&m, &0.0, &0.5).unwrap(), 0.5);
    }

    #[test]
    fn out_of_domain_point_is_rejected() {
        let m = PerturbedMetric::quartic_perturbed();
        assert!(matches!(eval_exact(&m, &0.0, &1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn perturbation_exceeding_distance_is_reported() {
        let m = PerturbedMetric::new(
            Interval::unit(),
            |x: &f64, y: &f64| (x - y).abs(),
            |_: &f64, _: &f64| 0.5,
        );
        assert!(matches!(
            eval_exact(&m, &0.0, &0.25),
            Err(Error::NegativeExactDistance { .. })
        ));
    }

    #[test]
    fn product_metric_passes_audit() {
        let m = PerturbedMetric::product_perturbed();
        let report = audit_axioms(&m, &[-1.0, 0.0, 0.5, 1.0, 2.0], AXIOM_TOLERANCE).unwrap();
        assert!(report.passed, "{:?}", report.violations);
        assert_eq!(report.samples_checked, 5);
    }

    #[test]
    fn quartic_distance_fails_triangle_when_treated_as_exact() {
        let m = PerturbedMetric::unperturbed(Interval::unit(), |x: &f64, y: &f64| (x - y).abs() + (x - y).powi(4));
        let report = audit_axioms(&m, &witness_triple(), AXIOM_TOLERANCE).unwrap();
        assert!(!report.passed);
        let v = report
            .violations_of(Axiom::P4)
            .find(|v| v.indices == vec![0, 2, 1])
            .expect("witness (0, 1/2, 1/3)");
        assert_eq!(v.lhs, 0.5625);
        assert!((v.rhs - 0.513117).abs() < 5e-4);
        assert!(v.gap > AXIOM_TOLERANCE);
    }

    #[test]
    fn single_point_sample_passes() {
        let m = PerturbedMetric::quartic_perturbed();
        let report = audit_axioms(&m, &[0.7], AXIOM_TOLERANCE).unwrap();
        assert!(report.passed);
        assert_eq!(report.samples_checked, 1);
    }

    #[test]
    fn degenerate_metric_fails_identity_axiom() {
        let m = PerturbedMetric::unperturbed(Interval::unit(), |x: &f64, y: &f64| (x.floor() - y.floor()).abs());
        let report = audit_axioms(&m, &[0.1, 0.2], AXIOM_TOLERANCE).unwrap();
        assert!(report.has(Axiom::P2));
        assert!(report.violations.iter().all(|v| v.gap > AXIOM_TOLERANCE));
    }

    #[test]
    fn asymmetric_distance_fails_symmetry() {
        let m = PerturbedMetric::unperturbed(
            Interval::unit(),
            |x: &f64, y: &f64| {
                if x < y {
                    2.0 * (y - x)
                } else {
                    x - y
                }
            },
        );
        let report = audit_axioms(&m, &[0.0, 0.5], AXIOM_TOLERANCE).unwrap();
        let v = report.violations_of(Axiom::P3).next().unwrap();
        assert_eq!((v.lhs, v.rhs), (1.0, 0.5));
    }

    #[test]
    fn empty_sample_is_rejected() {
        let m = PerturbedMetric::quartic_perturbed();
        assert!(audit_axioms(&m, &[], 0.0).is_err());
    }

    #[test]
    fn triangle_witness_matches_hand_computation() {
        let d = |x: &f64, y: &f64| Ok((x - y).abs() + (x - y).powi(4));
        let w = find_triangle_violation(d, &witness_triple(), AXIOM_TOLERANCE)
            .unwrap()
            .unwrap();
        assert_eq!((w.x, w.y, w.z), (0.0, 0.5, 1.0 / 3.0));
        assert_eq!(w.indices, [0, 2, 1]);
        // D(0,1/3) + D(1/3,1/2) = 1/3 + 1/81 + 1/6 + 1/1296
        let rhs = 1.0 / 3.0 + 1.0 / 81.0 + 1.0 / 6.0 + 1.0 / 1296.0;
        assert!((w.rhs - rhs).abs() < 1e-15);
        assert!((w.gap - (0.5625 - rhs)).abs() < 1e-15);
        assert!((w.gap - 0.0494).abs() < 1e-4);
    }

    #[test]
    fn true_metric_has_no_triangle_witness() {
        let d = |x: &f64, y: &f64| Ok((x - y).abs());
        let sample = Interval::unit().default_sample();
        assert!(find_triangle_violation(d, &sample, AXIOM_TOLERANCE).unwrap().is_none());
    }

    #[test]
    fn product_distance_breaks_triangle_on_dense_grid() {
        let m = PerturbedMetric::product_perturbed();
        let grid = Interval::new(0.0, 2.0).unwrap().uniform_grid(81);
        let d = |x: &f64, y: &f64| m.distance(x, y);
        let w = find_triangle_violation(d, &grid, AXIOM_TOLERANCE).unwrap().unwrap();
        assert!(w.gap > 0.0);
        // independent re-evaluation of the witness
        let direct =
            m.distance(&w.x, &w.y).unwrap() - m.distance(&w.x, &w.z).unwrap() - m.distance(&w.z, &w.y).unwrap();
        assert!((direct - w.gap).abs() < 1e-9);
    }

    #[test]
    fn triangle_search_needs_three_points() {
        let d = |x: &f64, y: &f64| Ok((x - y).abs());
        assert!(find_triangle_violation(d, &[0.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn averaging_equal_metrics_is_idempotent() {
        let m = PerturbedMetric::quartic_perturbed();
        let sample = Interval::unit().uniform_grid(20);
        let avg = average_perturbations(&m, &m, &sample, 1e-12).unwrap();
        for x in &sample {
            for y in &sample {
                assert_eq!(avg.parts(x, y).unwrap(), m.parts(x, y).unwrap());
            }
        }
    }

    #[test]
    fn averaging_two_decompositions_keeps_a_metric() {
        let space = Interval::unit();
        let base = |x: &f64, y: &f64| 2.0 * (x - y).abs() + (x - y).powi(2);
        let m1 = PerturbedMetric::new(space, base, |x, y| (x - y).abs() + (x - y).powi(2));
        let m2 = PerturbedMetric::new(space, base, |x, y| (x - y).powi(2));
        let sample = space.uniform_grid(20);
        assert!(audit_axioms(&m1, &sample, AXIOM_TOLERANCE).unwrap().passed);
        assert!(audit_axioms(&m2, &sample, AXIOM_TOLERANCE).unwrap().passed);
        let avg = average_perturbations(&m1, &m2, &sample, 1e-12).unwrap();
        assert!(audit_axioms(&avg, &sample, AXIOM_TOLERANCE).unwrap().passed);
        for x in &sample {
            for y in &sample {
                let want = 1.5 * (x - y).abs();
                assert!((avg.exact(x, y).unwrap() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cross_term_decomposition_is_not_a_perturbed_metric() {
        // D = |x-y| + x^2 y^4 + x^4 y^2 with P = x^2 y^4 leaves x^4 y^2 in
        // the exact part, which does not vanish on the diagonal.
        let space = Interval::unit();
        let m = PerturbedMetric::new(
            space,
            |x: &f64, y: &f64| (x - y).abs() + x * x * y.powi(4) + x.powi(4) * y * y,
            |x: &f64, y: &f64| x * x * y.powi(4),
        );
        let report = audit_axioms(&m, &space.uniform_grid(20), AXIOM_TOLERANCE).unwrap();
        assert!(report.has(Axiom::P2));
    }

    #[test]
    fn zero_perturbations_average_to_zero() {
        let space = Interval::unit();
        let m = PerturbedMetric::unperturbed(space, |x: &f64, y: &f64| (x - y).abs());
        let avg = average_perturbations(&m, &m, &[0.0, 1.0], 0.0).unwrap();
        assert_eq!(avg.exact(&0.2, &0.7).unwrap(), m.exact(&0.2, &0.7).unwrap());
    }

    #[test]
    fn averaging_different_bases_fails() {
        let m1 = PerturbedMetric::quartic_perturbed();
        let m2 = PerturbedMetric::quadratic_perturbed();
        assert!(matches!(
            average_perturbations(&m1, &m2, &[0.0, 0.5], 1e-12),
            Err(Error::MismatchedBase { .. })
        ));
    }

    #[test]
    fn scaling() {
        let m = PerturbedMetric::product_perturbed();
        let s = scale(2.0, &m).unwrap();
        assert_eq!(s.parts(&0.0, &1.0).unwrap(), (2.0, 0.0));
        assert_eq!(s.exact(&0.0, &1.0).unwrap(), 2.0);

        let q = PerturbedMetric::quartic_perturbed();
        let half = scale(0.5, &q).unwrap();
        assert_eq!(
            half.distance(&0.0, &0.5).unwrap(),
            0.5 * q.distance(&0.0, &0.5).unwrap()
        );
        assert_eq!(half.distance(&0.0, &0.5).unwrap(), 0.28125);

        let same = scale(1.0, &q).unwrap();
        assert_eq!(same.parts(&0.1, &0.9).unwrap(), q.parts(&0.1, &0.9).unwrap());

        let sample = Interval::unit().default_sample();
        assert!(audit_axioms(&half, &sample, AXIOM_TOLERANCE).unwrap().passed);
    }

    #[test]
    fn non_positive_scale_is_rejected() {
        let m = PerturbedMetric::quartic_perturbed();
        assert!(matches!(scale(0.0, &m), Err(Error::InvalidScale(_))));
        assert!(matches!(scale(-1.0, &m), Err(Error::InvalidScale(_))));
        assert!(matches!(scale(f64::NAN, &m), Err(Error::InvalidScale(_))));
    }
}
