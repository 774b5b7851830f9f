use serde::Serialize;

/// The property a violation witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axiom {
    /// d(x, y) >= 0
    P1,
    /// d(x, y) = 0 iff x = y
    P2,
    /// d(x, y) = d(y, x)
    P3,
    /// d(x, y) <= d(x, z) + d(z, y)
    P4,
    /// D(x, y) >= 0
    #[serde(rename = "distance_nonnegative")]
    DistanceNonNegative,
    /// P(x, y) >= 0
    #[serde(rename = "perturbation_nonnegative")]
    PerturbationNonNegative,
    /// strictly increasing
    F1,
    /// F(t) -> -inf as t -> 0+
    F2,
    /// t^k F(t) -> 0 as t -> 0+
    F3,
    #[serde(rename = "lipschitz")]
    Lipschitz,
    #[serde(rename = "self_map")]
    SelfMap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub axiom: Axiom,
    /// Sample indices of the points involved, in the order the axiom names
    /// them.
    pub indices: Vec<usize>,
    /// Scalar representatives of the points (the value itself for scalars,
    /// the sup-norm for grid functions).
    pub points: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

impl Violation {
    pub fn new(axiom: Axiom, indices: Vec<usize>, points: Vec<f64>, lhs: f64, rhs: f64) -> Self {
        Violation {
            axiom,
            indices,
            points,
            lhs,
            rhs,
            gap: lhs - rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
    pub samples_checked: usize,
}

impl AxiomReport {
    pub fn from_violations(violations: Vec<Violation>, samples_checked: usize) -> Self {
        AxiomReport {
            passed: violations.is_empty(),
            violations,
            samples_checked,
        }
    }

    pub fn violations_of(&self, axiom: Axiom) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.axiom == axiom)
    }

    pub fn has(&self, axiom: Axiom) -> bool {
        self.violations_of(axiom).next().is_some()
    }

    /// Combines two reports over disjoint checks; sample counts add.
    pub fn merge(mut self, other: AxiomReport) -> AxiomReport {
        self.violations.extend(other.violations);
        self.samples_checked += other.samples_checked;
        self.passed = self.violations.is_empty();
        self
    }
}
