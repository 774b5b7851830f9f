//! Functions F: (0, inf) -> R used to measure contraction: strictly
//! increasing (F1), tending to -inf exactly at 0+ (F2), and with
//! t^k F(t) -> 0 for some k in (0, 1) (F3).

use std::fmt;
use std::sync::Arc;

use crate::audit::{Axiom, AxiomReport, Violation};
use crate::error::{Error, Result};
use crate::expr::Formula;

#[derive(Clone)]
enum Kind {
    Ln,
    LnPlusX,
    NegInvSqrt,
    LnQuadratic,
    Expression(Formula),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

#[derive(Clone)]
pub struct FGauge {
    id: String,
    kind: Kind,
    k_witness: f64,
}

impl fmt::Debug for FGauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FGauge")
            .field("id", &self.id)
            .field("k_witness", &self.k_witness)
            .finish()
    }
}

impl FGauge {
    pub const BUILTIN_NAMES: [&'static str; 4] = ["ln", "ln_plus_x", "neg_inv_sqrt", "ln_quadratic"];

    /// F(t) = ln t
    pub fn ln() -> Self {
        Self::builtin_kind("ln", Kind::Ln, 0.5)
    }

    /// F(t) = ln t + t
    pub fn ln_plus_x() -> Self {
        Self::builtin_kind("ln_plus_x", Kind::LnPlusX, 0.5)
    }

    /// F(t) = -1/sqrt(t). Here t^k F(t) = -t^(k - 1/2), so (F3) needs
    /// k > 1/2.
    pub fn neg_inv_sqrt() -> Self {
        Self::builtin_kind("neg_inv_sqrt", Kind::NegInvSqrt, 0.75)
    }

    /// F(t) = ln(t^2 + t)
    pub fn ln_quadratic() -> Self {
        Self::builtin_kind("ln_quadratic", Kind::LnQuadratic, 0.5)
    }

    fn builtin_kind(id: &str, kind: Kind, k_witness: f64) -> Self {
        FGauge {
            id: id.to_string(),
            kind,
            k_witness,
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "ln" => Some(Self::ln()),
            "ln_plus_x" => Some(Self::ln_plus_x()),
            "neg_inv_sqrt" => Some(Self::neg_inv_sqrt()),
            "ln_quadratic" => Some(Self::ln_quadratic()),
            _ => None,
        }
    }

    pub fn builtins() -> Vec<Self> {
        Self::BUILTIN_NAMES.iter().filter_map(|n| Self::builtin(n)).collect()
    }

    /// A gauge given by a formula in the single variable `t`.
    pub fn from_formula(formula: Formula, k_witness: f64) -> Result<Self> {
        if formula.vars().len() != 1 {
            return Err(Error::InvalidInput(
                "gauge formula must have exactly one variable".into(),
            ));
        }
        Ok(FGauge {
            id: formula.source().to_string(),
            kind: Kind::Expression(formula),
            k_witness,
        })
    }

    pub fn custom(id: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static, k_witness: f64) -> Self {
        FGauge {
            id: id.into(),
            kind: Kind::Custom(Arc::new(f)),
            k_witness,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn k_witness(&self) -> f64 {
        self.k_witness
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self.kind, Kind::Expression(_) | Kind::Custom(_))
    }

    /// F(t) for t > 0.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveArgument(t));
        }
        Ok(match &self.kind {
            Kind::Ln => t.ln(),
            Kind::LnPlusX => t.ln() + t,
            Kind::NegInvSqrt => -1.0 / t.sqrt(),
            Kind::LnQuadratic => (t * t + t).ln(),
            Kind::Expression(f) => f.eval(&[t])?,
            Kind::Custom(f) => f(t),
        })
    }
}

pub fn eval_gauge(g: &FGauge, t: f64) -> Result<f64> {
    g.eval(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeAuditConfig {
    /// Exponent tested in (F3).
    pub k: f64,
    /// (F2) requires F(t) < -m_bound below `t_small`.
    pub m_bound: f64,
    /// (F3) requires |t^k F(t)| < eps below `t_small`.
    pub eps: f64,
    pub t_small: f64,
}

impl Default for GaugeAuditConfig {
    fn default() -> Self {
        GaugeAuditConfig {
            k: 0.5,
            m_bound: 10.0,
            eps: 1e-2,
            t_small: 1e-8,
        }
    }
}

impl GaugeAuditConfig {
    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }
}

/// Samples (F1)-(F3) on `grid`.
///
/// (F1) is checked on every pair of grid points. The limits in (F2) and
/// (F3) are discharged by thresholds on the grid points below
/// `config.t_small`: (F2) at the smallest such point, (F3) at all of them.
/// Passing is necessary, not sufficient, for `g` to be a gauge.
pub fn audit_gauge(g: &FGauge, grid: &[f64], config: &GaugeAuditConfig) -> Result<AxiomReport> {
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidInput(
            "gauge grid must be nonempty, positive and finite".into(),
        ));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("gauge grid must be strictly increasing".into()));
    }
    if !(config.k > 0.0 && config.k < 1.0) {
        return Err(Error::InvalidInput(format!("k must lie in (0, 1), got {}", config.k)));
    }
    if !(config.m_bound > 0.0) || !(config.eps > 0.0) || !(config.t_small > 0.0) {
        return Err(Error::InvalidInput("M, eps and t_small must be positive".into()));
    }

    let values = grid.iter().map(|&t| g.eval(t)).collect::<Result<Vec<_>>>()?;
    let mut violations = Vec::new();

    for i in 0..grid.len() {
        for j in i + 1..grid.len() {
            if !(values[i] < values[j]) {
                violations.push(Violation::new(
                    Axiom::F1,
                    vec![i, j],
                    vec![grid[i], grid[j]],
                    values[i],
                    values[j],
                ));
            }
        }
    }

    if grid[0] < config.t_small && !(values[0] < -config.m_bound) {
        violations.push(Violation::new(
            Axiom::F2,
            vec![0],
            vec![grid[0]],
            values[0],
            -config.m_bound,
        ));
    }

    for (i, (&t, &f)) in grid.iter().zip(&values).enumerate() {
        if t >= config.t_small {
            break;
        }
        let scaled = (t.powf(config.k) * f).abs();
        if !(scaled < config.eps) {
            violations.push(Violation::new(Axiom::F3, vec![i], vec![t], scaled, config.eps));
        }
    }

    Ok(AxiomReport::from_violations(violations, grid.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::space::logspace;

    #[test]
    fn builtin_values() {
        assert_eq!(FGauge::ln().eval(1.0).unwrap(), 0.0);
        assert_eq!(FGauge::neg_inv_sqrt().eval(4.0).unwrap(), -0.5);
        assert!((FGauge::ln_quadratic().eval(1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(FGauge::ln_plus_x().eval(1.0).unwrap(), 1.0);
    }

    #[test]
    fn non_positive_argument_is_rejected() {
        for g in FGauge::builtins() {
            assert!(matches!(g.eval(0.0), Err(Error::NonPositiveArgument(_))));
            assert!(matches!(g.eval(-1.0), Err(Error::NonPositiveArgument(_))));
            assert!(g.eval(f64::NAN).is_err());
        }
    }

    #[test]
    fn ln_passes_audit() {
        let grid = logspace(1e-12, 10.0, 100);
        let report = audit_gauge(&FGauge::ln(), &grid, &GaugeAuditConfig::default()).unwrap();
        assert!(report.passed, "{:?}", report.violations);
        // sqrt(1e-12) * ln(1e-12)
        let edge = 1e-6 * (1e-12f64).ln();
        assert!((edge + 2.763e-5).abs() < 1e-8);
    }

    #[test]
    fn ln_plus_x_passes_audit() {
        let grid = logspace(1e-12, 10.0, 100);
        assert!(
            audit_gauge(&FGauge::ln_plus_x(), &grid, &GaugeAuditConfig::default())
                .unwrap()
                .passed
        );
    }

    #[test]
    fn reciprocal_is_not_a_gauge() {
        let g = FGauge::custom("-1/t", |t| -1.0 / t, 0.5);
        assert_eq!(g.eval(1e-6).unwrap() * 1e-3, -1000.0);
        let grid = logspace(1e-12, 10.0, 100);
        let report = audit_gauge(&g, &grid, &GaugeAuditConfig::default()).unwrap();
        assert!(report.has(Axiom::F3));
        assert!(!report.has(Axiom::F1));
        assert!(!report.has(Axiom::F2));
    }

    #[test]
    fn neg_inv_sqrt_needs_k_above_one_half() {
        let grid = logspace(1e-12, 10.0, 200);
        let g = FGauge::neg_inv_sqrt();
        let at_half = audit_gauge(&g, &grid, &GaugeAuditConfig::default()).unwrap();
        assert!(at_half.has(Axiom::F3));
        let own = GaugeAuditConfig::default().with_k(g.k_witness());
        assert!(audit_gauge(&g, &grid, &own).unwrap().passed);
    }

    #[test]
    fn decreasing_function_fails_monotonicity() {
        let g = FGauge::custom("-ln", |t| -t.ln(), 0.5);
        let report = audit_gauge(&g, &[1.0, 2.0, 3.0], &GaugeAuditConfig::default()).unwrap();
        assert_eq!(report.violations_of(Axiom::F1).count(), 3);
    }

    #[test]
    fn bounded_below_function_fails_f2() {
        let g = FGauge::custom("atan", f64::atan, 0.5);
        let report = audit_gauge(&g, &logspace(1e-12, 1.0, 50), &GaugeAuditConfig::default()).unwrap();
        assert!(report.has(Axiom::F2));
    }

    #[test]
    fn expression_gauge() {
        let g = FGauge::from_formula(parse_expr("ln(t) + t", &["t"]).unwrap(), 0.5).unwrap();
        assert_eq!(g.id(), "ln(t) + t");
        let grid = logspace(1e-12, 10.0, 200);
        assert!(audit_gauge(&g, &grid, &GaugeAuditConfig::default()).unwrap().passed);
        assert!(!g.is_builtin());
    }

    #[test]
    fn invalid_audit_inputs() {
        let g = FGauge::ln();
        let cfg = GaugeAuditConfig::default();
        assert!(audit_gauge(&g, &[], &cfg).is_err());
        assert!(audit_gauge(&g, &[1.0, 0.5], &cfg).is_err());
        assert!(audit_gauge(&g, &[0.0, 0.5], &cfg).is_err());
        assert!(audit_gauge(&g, &[0.5, 1.0], &cfg.with_k(1.0)).is_err());
    }

    #[test]
    fn ln_turns_products_into_sums() {
        let g = FGauge::ln();
        for a in [0.1, 0.37, 1.0, 2.5, 10.0] {
            for b in [0.1, 0.9, 3.3, 10.0] {
                let lhs = g.eval(a * b).unwrap();
                let rhs = g.eval(a).unwrap() + g.eval(b).unwrap();
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }
}
