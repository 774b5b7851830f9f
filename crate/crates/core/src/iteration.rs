//! Picard iteration `x_{n+1} = T x_n` with the diagnostics the fixed-point
//! argument relies on: gamma_n = D(x_{n+1}, x_n), its exact part, and
//! F(gamma_n).

use rayon::prelude::*;
use serde::Serialize;

use crate::cert::ZERO_THRESHOLD;
use crate::error::{Error, Result};
use crate::gauge::FGauge;
use crate::map::SelfMap;
use crate::metric::PerturbedMetric;
use crate::space::Space;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    FixedPoint,
    ToleranceMet,
    MaxIters,
    DomainExit,
}

impl StopReason {
    pub fn converged(self) -> bool {
        matches!(self, StopReason::FixedPoint | StopReason::ToleranceMet)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace<P> {
    /// x_0 .. x_N
    pub points: Vec<P>,
    /// gamma_n = D(x_{n+1}, x_n)
    pub gamma: Vec<f64>,
    /// P(x_{n+1}, x_n)
    pub perturbation: Vec<f64>,
    /// d_n = d(x_{n+1}, x_n)
    pub exact_steps: Vec<f64>,
    /// F(gamma_n), recorded while gamma_n stays above the zero threshold.
    pub f_gamma: Vec<f64>,
    pub stop_reason: StopReason,
}

impl<P> IterationTrace<P> {
    pub fn iterations(&self) -> usize {
        self.gamma.len()
    }

    pub fn last(&self) -> &P {
        self.points.last().expect("trace holds x_0")
    }
}

/// Iterates `map` from `x0` until the exact step `d(x_{n+1}, x_n)` drops
/// below `tol`, an iterate repeats, or `max_iters` applications are spent.
///
/// An iterate outside the space ends the run with
/// [`StopReason::DomainExit`]; the trace stops at the last valid point.
pub fn iterate<S: Space>(
    map: &SelfMap<S>,
    x0: &S::Point,
    metric: &PerturbedMetric<S>,
    tol: f64,
    max_iters: usize,
    gauge: Option<&FGauge>,
) -> Result<IterationTrace<S::Point>> {
    if !(tol > 0.0) {
        return Err(Error::validation("tol", format!("must be positive, got {tol}")));
    }
    if max_iters == 0 {
        return Err(Error::validation("max_iters", "must be at least 1"));
    }
    let space = metric.space();
    space.check(x0)?;

    let mut trace = IterationTrace {
        points: vec![x0.clone()],
        gamma: Vec::new(),
        perturbation: Vec::new(),
        exact_steps: Vec::new(),
        f_gamma: Vec::new(),
        stop_reason: StopReason::MaxIters,
    };
    let mut recording = gauge.is_some();

    for _ in 0..max_iters {
        let current = trace.last().clone();
        let next = map.apply(&current)?;
        if !space.contains(&next) {
            trace.stop_reason = StopReason::DomainExit;
            break;
        }
        let (big, pert) = metric.parts(&next, &current)?;
        let exact = metric.exact(&next, &current)?;
        if let (true, Some(g)) = (recording, gauge) {
            if big > ZERO_THRESHOLD {
                trace.f_gamma.push(g.eval(big)?);
            } else {
                recording = false;
            }
        }
        trace.gamma.push(big);
        trace.perturbation.push(pert);
        trace.exact_steps.push(exact);
        let separation = space.separation(&next, &current);
        trace.points.push(next);

        if separation == 0.0 {
            trace.stop_reason = StopReason::FixedPoint;
            break;
        }
        if exact < tol {
            trace.stop_reason = StopReason::ToleranceMet;
            break;
        }
        if separation <= crate::space::POINT_TOLERANCE {
            trace.stop_reason = StopReason::FixedPoint;
            break;
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaDecay {
    pub holds: bool,
    pub first_failure: Option<usize>,
    /// Number of indices n >= 1 compared against F(gamma_0) - n tau.
    pub checked: usize,
}

/// Checks `F(gamma_n) <= F(gamma_0) - n tau + tol` along the trace.
///
/// Zero steps between coinciding iterates end the check (the sequence has
/// reached a fixed point); a zero step between distinct iterates means the
/// metric is invalid.
pub fn check_gamma_decay<P>(trace: &IterationTrace<P>, gauge: &FGauge, tau: f64, tol: f64) -> Result<GammaDecay> {
    let vacuous = GammaDecay {
        holds: true,
        first_failure: None,
        checked: 0,
    };
    if trace.gamma.len() < 2 {
        return Ok(vacuous);
    }
    let usable = |n: usize| -> Result<bool> {
        let g = trace.gamma[n];
        if g > 0.0 {
            Ok(true)
        } else if trace.exact_steps[n] > 0.0 {
            Err(Error::NonPositiveArgument(g))
        } else {
            Ok(false)
        }
    };
    if !usable(0)? {
        return Ok(vacuous);
    }
    let f0 = gauge.eval(trace.gamma[0])?;
    let mut checked = 0;
    for n in 1..trace.gamma.len() {
        if !usable(n)? {
            break;
        }
        checked += 1;
        let fn_ = gauge.eval(trace.gamma[n])?;
        if fn_ > f0 - n as f64 * tau + tol {
            return Ok(GammaDecay {
                holds: false,
                first_failure: Some(n),
                checked,
            });
        }
    }
    Ok(GammaDecay {
        holds: true,
        first_failure: None,
        checked,
    })
}

/// Geometric mean of successive exact-step ratios over the tail half of
/// the steps above the zero threshold. Values below 1 indicate contraction.
pub fn estimate_rate<P>(trace: &IterationTrace<P>) -> Result<f64> {
    let steps: Vec<f64> = trace
        .exact_steps
        .iter()
        .copied()
        .take_while(|s| *s > ZERO_THRESHOLD)
        .collect();
    if steps.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "rate needs 3 nonzero steps, trace has {}",
            steps.len()
        )));
    }
    let ratios: Vec<f64> = steps.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len() / 2..];
    let mean_log = tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64;
    Ok(mean_log.exp())
}

/// Largest excess of `d(x_{n+p}, x_n)` over the chained step sum
/// `sum_{i<p} d(x_{n+i+1}, x_{n+i})`, over all n, p. Nonpositive (up to
/// rounding) whenever the exact metric satisfies the triangle inequality.
pub fn cauchy_chain_excess<S: Space>(trace: &IterationTrace<S::Point>, metric: &PerturbedMetric<S>) -> Result<f64> {
    let pts = &trace.points;
    let mut worst = f64::NEG_INFINITY;
    for n in 0..pts.len() {
        let mut chain = 0.0;
        for p in 1..pts.len() - n {
            chain += trace.exact_steps[n + p - 1];
            let direct = metric.exact(&pts[n + p], &pts[n])?;
            worst = worst.max(direct - chain);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct MultiStart<P> {
    pub traces: Vec<IterationTrace<P>>,
    /// Largest exact distance between two final iterates.
    pub max_pairwise_distance: f64,
}

/// Runs [`iterate`] from each start in parallel and measures how far apart
/// the final points are.
pub fn multi_start<S: Space>(
    map: &SelfMap<S>,
    starts: &[S::Point],
    metric: &PerturbedMetric<S>,
    tol: f64,
    max_iters: usize,
) -> Result<MultiStart<S::Point>> {
    let traces = starts
        .par_iter()
        .map(|x0| iterate(map, x0, metric, tol, max_iters, None))
        .collect::<Result<Vec<_>>>()?;
    let mut max_pairwise_distance: f64 = 0.0;
    for (i, a) in traces.iter().enumerate() {
        for b in &traces[i + 1..] {
            max_pairwise_distance = max_pairwise_distance.max(metric.exact(a.last(), b.last())?);
        }
    }
    Ok(MultiStart {
        traces,
        max_pairwise_distance,
    })
}
