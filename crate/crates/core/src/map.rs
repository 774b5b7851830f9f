use std::fmt;
use std::sync::Arc;

use crate::audit::{Axiom, AxiomReport, Violation};
use crate::error::Result;
use crate::expr::Formula;
use crate::space::{Interval, Space};

pub type PointFn<P> = Arc<dyn Fn(&P) -> Result<P> + Send + Sync>;

/// A transformation `T` of a space into itself.
#[derive(Clone)]
pub struct SelfMap<S: Space> {
    space: S,
    apply: PointFn<S::Point>,
}

impl<S: Space> fmt::Debug for SelfMap<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SelfMap")
            .field("space", &self.space)
            .finish_non_exhaustive()
    }
}

impl<S: Space> SelfMap<S> {
    pub fn new(space: S, apply: impl Fn(&S::Point) -> S::Point + Send + Sync + 'static) -> Self {
        Self::from_fallible(space, Arc::new(move |x| Ok(apply(x))))
    }

    pub fn from_fallible(space: S, apply: PointFn<S::Point>) -> Self {
        SelfMap { space, apply }
    }

    pub fn space(&self) -> &S {
        &self.space
    }

    /// `T x`, without a domain check on the result.
    pub fn apply(&self, x: &S::Point) -> Result<S::Point> {
        (self.apply)(x)
    }

    /// `T^n x`, failing with the step index if an iterate leaves the space.
    pub fn apply_n(&self, x: &S::Point, n: usize) -> std::result::Result<S::Point, IterateError> {
        let mut current = x.clone();
        for step in 1..=n {
            current = self.apply(&current).map_err(IterateError::Eval)?;
            if !self.space.contains(&current) {
                return Err(IterateError::Exit(step));
            }
        }
        Ok(current)
    }

    /// Checks `T x` lies in the space for every sample point.
    pub fn check_self_map(&self, sample: &[S::Point]) -> Result<AxiomReport> {
        let mut violations = Vec::new();
        for (i, x) in sample.iter().enumerate() {
            let image = self.apply(x)?;
            let excess = self.space.excess(&image);
            if excess > 0.0 {
                violations.push(Violation::new(
                    Axiom::SelfMap,
                    vec![i],
                    vec![self.space.repr(x), self.space.repr(&image)],
                    excess,
                    0.0,
                ));
            }
        }
        Ok(AxiomReport::from_violations(violations, sample.len()))
    }
}

#[derive(Debug)]
pub enum IterateError {
    Eval(crate::error::Error),
    Exit(usize),
}

impl SelfMap<Interval> {
    /// `T x = formula(x)` on a scalar interval.
    pub fn from_formula(domain: Interval, formula: Formula) -> Self {
        Self::from_fallible(domain, Arc::new(move |x: &f64| formula.eval(&[*x])))
    }

    /// `T x = factor * x`.
    pub fn linear(domain: Interval, factor: f64) -> Self {
        Self::new(domain, move |x| factor * x)
    }
}
