//! Sampled certification of the contraction condition
//! `tau + F(D(Tx, Ty)) <= F(D(x, y))` (required whenever `D(Tx, Ty) > 0`)
//! and of the iterate-series condition `D(T^n x, T^n y) <= a_n D(x, y)`.
//!
//! Everything here is evaluated on a finite pair list. A certificate says the
//! inequality holds on those pairs, nothing more; in particular
//! [`estimate_tau_max`] is the infimum over the sampled pairs, which can
//! overestimate the supremal admissible tau on the continuum.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauge::FGauge;
use crate::map::{IterateError, SelfMap};
use crate::metric::PerturbedMetric;
use crate::space::Space;

/// Pairs with `D(Tx, Ty)` at or below this are exempt from the contraction
/// inequality.
pub const ZERO_THRESHOLD: f64 = 1e-14;

/// Tail ratio bound for the series convergence heuristic.
pub const TAIL_RATIO_THRESHOLD: f64 = 0.95;

/// Every ordered pair `(x, y)` of `points`, row-major.
pub fn cartesian_pairs<P: Clone>(points: &[P]) -> Vec<(P, P)> {
    points
        .iter()
        .flat_map(|x| points.iter().map(move |y| (x.clone(), y.clone())))
        .collect()
}

/// Consecutive disjoint pairs `(p0, p1), (p2, p3), ...`.
pub fn chunked_pairs<P: Clone>(points: &[P]) -> Vec<(P, P)> {
    points.chunks_exact(2).map(|c| (c[0].clone(), c[1].clone())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairWitness {
    pub index: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertReport {
    pub certified: bool,
    pub tau: f64,
    /// min over eligible pairs of `F(D(x,y)) - F(D(Tx,Ty)) - tau`; `None`
    /// when every pair was skipped.
    pub worst_margin: Option<f64>,
    pub worst_pair: Option<PairWitness>,
    pub pairs_checked: usize,
    pub pairs_skipped_zero: usize,
}

enum PairEval {
    Skipped,
    /// `F(D(x,y)) - F(D(Tx,Ty))`
    Gain(f64),
}

fn gains<S: Space>(
    map: &SelfMap<S>,
    metric: &PerturbedMetric<S>,
    gauge: &FGauge,
    pairs: &[(S::Point, S::Point)],
) -> Result<Vec<PairEval>> {
    pairs
        .par_iter()
        .map(|(x, y)| {
            let tx = map.apply(x)?;
            let ty = map.apply(y)?;
            let after = metric.distance(&tx, &ty)?;
            if !(after > ZERO_THRESHOLD) {
                return Ok(PairEval::Skipped);
            }
            let before = metric.distance(x, y)?;
            if !(before > 0.0) {
                return Err(Error::NonPositiveArgument(before));
            }
            Ok(PairEval::Gain(gauge.eval(before)? - gauge.eval(after)?))
        })
        .collect()
}

/// Checks the contraction inequality with margin
/// `F(D(x,y)) - F(D(Tx,Ty)) - tau` on every pair; certified iff all margins
/// are `>= -tol`.
pub fn certify_f_perturbed<S: Space>(
    map: &SelfMap<S>,
    metric: &PerturbedMetric<S>,
    gauge: &FGauge,
    tau: f64,
    pairs: &[(S::Point, S::Point)],
    tol: f64,
) -> Result<CertReport> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::validation("tau", format!("must be positive, got {tau}")));
    }
    if !(tol >= 0.0) {
        return Err(Error::validation("tol", format!("must be >= 0, got {tol}")));
    }
    let evals = gains(map, metric, gauge, pairs)?;
    let mut worst: Option<(usize, f64)> = None;
    let mut checked = 0;
    for (i, e) in evals.iter().enumerate() {
        if let PairEval::Gain(g) = e {
            checked += 1;
            let margin = g - tau;
            if worst.is_none_or(|(_, w)| margin < w) {
                worst = Some((i, margin));
            }
        }
    }
    let space = metric.space();
    Ok(CertReport {
        certified: worst.is_none_or(|(_, w)| w >= -tol),
        tau,
        worst_margin: worst.map(|(_, w)| w),
        worst_pair: worst.map(|(i, _)| PairWitness {
            index: i,
            x: space.repr(&pairs[i].0),
            y: space.repr(&pairs[i].1),
        }),
        pairs_checked: checked,
        pairs_skipped_zero: pairs.len() - checked,
    })
}

/// The largest tau the sampled pairs admit: the minimum over eligible pairs
/// of `F(D(x,y)) - F(D(Tx,Ty))`.
pub fn estimate_tau_max<S: Space>(
    map: &SelfMap<S>,
    metric: &PerturbedMetric<S>,
    gauge: &FGauge,
    pairs: &[(S::Point, S::Point)],
) -> Result<f64> {
    gains(map, metric, gauge, pairs)?
        .into_iter()
        .filter_map(|e| match e {
            PairEval::Gain(g) => Some(g),
            PairEval::Skipped => None,
        })
        .reduce(f64::min)
        .ok_or(Error::NoEligiblePairs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesEstimate {
    /// `a[n-1]` estimates a_n = sup D(T^n x, T^n y) / D(x, y) over the pairs.
    pub a: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Heuristic: every tail ratio a_{n+1}/a_n is at most
    /// [`TAIL_RATIO_THRESHOLD`]. Finite data cannot prove convergence.
    pub convergent_flag: bool,
    pub tail_ratio_max: Option<f64>,
    pub pairs_used: usize,
}

/// Estimates the coefficients a_1..a_{n_max} by iterating `T` on both
/// members of each pair with distinct points.
pub fn estimate_series<S: Space>(
    map: &SelfMap<S>,
    metric: &PerturbedMetric<S>,
    pairs: &[(S::Point, S::Point)],
    n_max: usize,
) -> Result<SeriesEstimate> {
    if n_max == 0 {
        return Err(Error::validation("n_max", "must be at least 1"));
    }
    let space = metric.space();
    let per_pair: Vec<Option<Vec<f64>>> = pairs
        .par_iter()
        .map(|(x, y)| {
            if space.same_point(x, y) {
                return Ok(None);
            }
            let base = metric.distance(x, y)?;
            if !(base > 0.0) {
                return Err(Error::NonPositiveArgument(base));
            }
            let (mut xn, mut yn) = (x.clone(), y.clone());
            let mut ratios = Vec::with_capacity(n_max);
            for step in 1..=n_max {
                xn = map.apply_n(&xn, 1).map_err(|e| lift(e, step))?;
                yn = map.apply_n(&yn, 1).map_err(|e| lift(e, step))?;
                ratios.push(metric.distance(&xn, &yn)? / base);
            }
            Ok(Some(ratios))
        })
        .collect::<Result<_>>()?;

    let mut a = vec![0.0f64; n_max];
    let mut used = 0;
    for ratios in per_pair.into_iter().flatten() {
        used += 1;
        for (slot, r) in a.iter_mut().zip(ratios) {
            *slot = slot.max(r);
        }
    }
    if used == 0 {
        return Err(Error::InsufficientData("no pair of distinct points".into()));
    }

    let partial_sums = a
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let (convergent_flag, tail_ratio_max) = tail_ratio_test(&a);
    Ok(SeriesEstimate {
        a,
        partial_sums,
        convergent_flag,
        tail_ratio_max,
        pairs_used: used,
    })
}

fn lift(e: IterateError, step: usize) -> Error {
    match e {
        IterateError::Eval(e) => e,
        IterateError::Exit(_) => Error::OverflowGuard { step },
    }
}

/// Ratio test over the last ceil(n/2) terms (each against its predecessor).
fn tail_ratio_test(a: &[f64]) -> (bool, Option<f64>) {
    let n = a.len();
    let start = (n - n.div_ceil(2)).max(1);
    let ratios: Vec<f64> = (start..n)
        .map(|i| match (a[i - 1], a[i]) {
            (_, 0.0) => 0.0,
            (0.0, _) => f64::INFINITY,
            (prev, cur) => cur / prev,
        })
        .collect();
    let max = ratios.iter().copied().reduce(f64::max);
    (max.is_some_and(|m| m <= TAIL_RATIO_THRESHOLD), max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Interval;

    fn unit_pairs(n: usize) -> Vec<(f64, f64)> {
        cartesian_pairs(&Interval::unit().uniform_grid(n))
    }

    #[test]
    fn halving_certifies_at_ln2() {
        let t = SelfMap::linear(Interval::unit(), 0.5);
        let m = PerturbedMetric::quartic_perturbed();
        let r = certify_f_perturbed(&t, &m, &FGauge::ln(), 2f64.ln(), &unit_pairs(200), 0.0).unwrap();
        assert!(r.certified);
        assert!(r.worst_margin.unwrap() >= 0.0);
        assert_eq!(r.pairs_checked + r.pairs_skipped_zero, 40_000);
        assert_eq!(r.pairs_skipped_zero, 200);
    }

    #[test]
    fn halving_fails_at_tau_one() {
        let t = SelfMap::linear(Interval::unit(), 0.5);
        let m = PerturbedMetric::quartic_perturbed();
        let r = certify_f_perturbed(&t, &m, &FGauge::ln(), 1.0, &unit_pairs(200), 0.0).unwrap();
        assert!(!r.certified);
        // worst at the smallest separation h = 1/199:
        // ln((h + h^4) / (h/2 + h^4/16)) - 1
        let h = 1.0f64 / 199.0;
        let expect = ((h + h.powi(4)) / (h / 2.0 + h.powi(4) / 16.0)).ln() - 1.0;
        assert!((r.worst_margin.unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn identity_is_never_certified() {
        let t = SelfMap::new(Interval::unit(), |x: &f64| *x);
        let m = PerturbedMetric::quartic_perturbed();
        let tau = 0.3;
        let r = certify_f_perturbed(&t, &m, &FGauge::ln(), tau, &unit_pairs(20), 0.0).unwrap();
        assert!(!r.certified);
        assert_eq!(r.worst_margin, Some(-tau));
        assert_eq!(r.pairs_skipped_zero, 20);
        assert_eq!(estimate_tau_max(&t, &m, &FGauge::ln(), &unit_pairs(20)).unwrap(), 0.0);
    }

    #[test]
    fn tau_max_of_halving_is_ln2() {
        let t = SelfMap::linear(Interval::unit(), 0.5);
        let m = PerturbedMetric::quartic_perturbed();
        let pairs = unit_pairs(200);
        // brute-force oracle: min over distinct grid separations of
        // ln((h + h^4) / (h/2 + h^4/16))
        let oracle = (1..200)
            .map(|k| {
                let h = k as f64 / 199.0;
                ((h + h.powi(4)) / (h / 2.0 + h.powi(4) / 16.0)).ln()
            })
            .fold(f64::INFINITY, f64::min);
        let tau = estimate_tau_max(&t, &m, &FGauge::ln(), &pairs).unwrap();
        assert!((tau - oracle).abs() < 1e-12);
        assert!((tau - 2f64.ln()).abs() < 1e-4);
    }

    #[test]
    fn tau_max_of_third_is_ln3() {
        let t = SelfMap::linear(Interval::unit(), 1.0 / 3.0);
        let m = PerturbedMetric::quadratic_perturbed();
        let tau = estimate_tau_max(&t, &m, &FGauge::ln(), &unit_pairs(1001)).unwrap();
        assert!((tau - 3f64.ln()).abs() < 1e-3, "{tau}");
    }

    #[test]
    fn all_pairs_skipped() {
        let t = SelfMap::new(Interval::unit(), |_: &f64| 0.25);
        let m = PerturbedMetric::quartic_perturbed();
        let pairs = unit_pairs(5);
        assert!(matches!(
            estimate_tau_max(&t, &m, &FGauge::ln(), &pairs),
            Err(Error::NoEligiblePairs)
        ));
        let r = certify_f_perturbed(&t, &m, &FGauge::ln(), 1.0, &pairs, 0.0).unwrap();
        assert!(r.certified);
        assert_eq!(r.worst_margin, None);
        assert_eq!(r.pairs_skipped_zero, 25);
    }

    #[test]
    fn non_positive_tau_is_rejected() {
        let t = SelfMap::linear(Interval::unit(), 0.5);
        let m = PerturbedMetric::quartic_perturbed();
        assert!(certify_f_perturbed(&t, &m, &FGauge::ln(), 0.0, &unit_pairs(3), 0.0).is_err());
    }

    #[test]
    fn series_of_third() {
        let t = SelfMap::linear(Interval::unit(), 1.0 / 3.0);
        let m = PerturbedMetric::quadratic_perturbed();
        let s = estimate_series(&t, &m, &unit_pairs(200), 10).unwrap();
        assert!(s.convergent_flag);
        assert!(*s.partial_sums.last().unwrap() <= 0.51);
        for (n, a) in s.a.iter().enumerate() {
            let bound = 3f64.powi(-(n as i32 + 1));
            assert!(*a <= bound && *a > 0.99 * bound, "n={} a={a}", n + 1);
        }
    }

    #[test]
    fn series_of_banach_map_is_geometric() {
        let t = SelfMap::linear(Interval::unit(), 0.5);
        let m = PerturbedMetric::unperturbed(Interval::unit(), |x: &f64, y: &f64| (x - y).abs());
        let s = estimate_series(&t, &m, &unit_pairs(50), 20).unwrap();
        for (n, a) in s.a.iter().enumerate() {
            assert!((a - 0.5f64.powi(n as i32 + 1)).abs() < 1e-12);
        }
        assert!((s.partial_sums[19] - 1.0).abs() < 1e-5);
        assert!(s.convergent_flag);
    }

    #[test]
    fn series_of_identity_diverges() {
        let t = SelfMap::new(Interval::unit(), |x: &f64| *x);
        let m = PerturbedMetric::quartic_perturbed();
        let s = estimate_series(&t, &m, &unit_pairs(10), 6).unwrap();
        assert!(s.a.iter().all(|a| (a - 1.0).abs() < 1e-15));
        assert!(!s.convergent_flag);
        assert_eq!(s.tail_ratio_max, Some(1.0));
    }

    #[test]
    fn series_detects_domain_exit() {
        let t = SelfMap::linear(Interval::unit(), 1.5);
        let m = PerturbedMetric::quartic_perturbed();
        let r = estimate_series(&t, &m, &[(0.2, 0.6)], 5);
        assert!(matches!(r, Err(Error::OverflowGuard { step: 2 })));
    }

    #[test]
    fn tail_ratio_edge_cases() {
        assert_eq!(tail_ratio_test(&[0.5]), (false, None));
        assert!(tail_ratio_test(&[0.5, 0.25]).0);
        assert!(tail_ratio_test(&[0.0, 0.0, 0.0]).0);
        assert!(!tail_ratio_test(&[0.0, 0.1]).0);
    }
}
