//! Runs a parsed spec and writes its outputs.
//!
//! Every kind writes `report.json`; iteration-like kinds add `trace.csv`
//! and `bvp` adds `solution.csv`. The returned [`Outcome`] maps onto the
//! exit-code contract: affirmed 0, refuted 2 (errors are 1).

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::audit::{AxiomReport, Violation};
use crate::bvp::{self, BvpProblem};
use crate::cert::{self, CertReport, PairWitness};
use crate::error::{Error, Result};
use crate::gauge::{audit_gauge, FGauge, GaugeAuditConfig};
use crate::iteration::{self, GammaDecay, StopReason};
use crate::map::SelfMap;
use crate::metric::{self, PerturbedMetric, TriangleWitness};
use crate::report::{self, format_float, Table};
use crate::space::{logspace, GridFunction, GridSpace, Interval, Space};
use crate::spec::{Kind, ProblemSpec};

/// At most this many violations are listed in a report; the total is
/// always given.
pub const MAX_LISTED_VIOLATIONS: usize = 100;

/// Tolerance for the gamma-decay inequality.
pub const DECAY_TOL: f64 = 1e-10;

/// Half-width of the window used for sampling on unbounded domains.
pub const UNBOUNDED_WINDOW: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Certified, converged or passed.
    Affirmed,
    /// Refuted or not converged.
    Refuted,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Affirmed => 0,
            Outcome::Refuted => 2,
        }
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Affirmed
        } else {
            Outcome::Refuted
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: Outcome,
    pub files: Vec<PathBuf>,
}

/// Executes `spec`, writing outputs into `out_dir` (created if needed).
pub fn run_command(spec: &ProblemSpec, out_dir: &Path) -> Result<RunResult> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut out = Outputs {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    let outcome = match spec.kind {
        Kind::MetricAudit => run_metric_audit(spec, &mut out)?,
        Kind::GaugeAudit => run_gauge_audit(spec, &mut out)?,
        Kind::Certify => run_certify(spec, &mut out)?,
        Kind::Iterate => run_iterate(spec, &mut out)?,
        Kind::Series => run_series(spec, &mut out)?,
        Kind::Bvp => run_bvp(spec, &mut out)?,
    };
    Ok(RunResult {
        outcome,
        files: out.files,
    })
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.dir.join(name);
        report::write_json(&path, value)?;
        self.files.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        let path = self.dir.join(name);
        table.write(&path)?;
        self.files.push(path);
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct AuditSummary {
    passed: bool,
    samples_checked: usize,
    violation_count: usize,
    violations: Vec<Violation>,
}

impl From<AxiomReport> for AuditSummary {
    fn from(r: AxiomReport) -> Self {
        let violation_count = r.violations.len();
        let mut violations = r.violations;
        violations.truncate(MAX_LISTED_VIOLATIONS);
        AuditSummary {
            passed: r.passed,
            samples_checked: r.samples_checked,
            violation_count,
            violations,
        }
    }
}

fn scalar_metric(spec: &ProblemSpec) -> PerturbedMetric<Interval> {
    PerturbedMetric::from_formulas(spec.domain(), spec.expr("D").clone(), spec.expr("P").clone())
}

fn scalar_map(spec: &ProblemSpec) -> SelfMap<Interval> {
    SelfMap::from_formula(spec.domain(), spec.expr("T").clone())
}

/// The part of `domain` that is sampled: the interval itself when bounded,
/// otherwise its intersection with `[-UNBOUNDED_WINDOW, UNBOUNDED_WINDOW]`
/// (shifted to touch a finite end).
fn sampling_window(domain: Interval) -> Interval {
    let w = UNBOUNDED_WINDOW;
    match (domain.lo.is_finite(), domain.hi.is_finite()) {
        (true, true) => domain,
        (true, false) => Interval {
            lo: domain.lo,
            hi: domain.lo + 2.0 * w,
        },
        (false, true) => Interval {
            lo: domain.hi - 2.0 * w,
            hi: domain.hi,
        },
        (false, false) => Interval { lo: -w, hi: w },
    }
}

fn bounded(spec: &ProblemSpec) -> Result<Interval> {
    let d = spec.domain();
    if d.lo.is_finite() && d.hi.is_finite() {
        Ok(d)
    } else {
        Err(Error::validation(
            "domain",
            format!("{} needs a bounded domain", spec.kind),
        ))
    }
}

fn gauge_grid() -> Vec<f64> {
    logspace(1e-12, 10.0, 200)
}

/// User-written gauges are audited (at their own k) before use.
fn vetted_gauge(g: &FGauge) -> Result<()> {
    if g.is_builtin() {
        return Ok(());
    }
    let config = GaugeAuditConfig::default().with_k(g.k_witness());
    let report = audit_gauge(g, &gauge_grid(), &config)?;
    if report.passed {
        Ok(())
    } else {
        Err(Error::GaugeRejected {
            id: g.id().to_string(),
            violations: report.violations.len(),
        })
    }
}

#[derive(Debug, Serialize)]
struct MetricAuditReport<'a> {
    kind: Kind,
    distance: &'a str,
    perturbation: &'a str,
    domain: [f64; 2],
    tol: f64,
    sample_size: usize,
    /// Axioms (P1)-(P4) for the exact metric D - P.
    exact_metric: AuditSummary,
    /// Largest triangle excess of D itself, if any.
    distance_triangle_witness: Option<TriangleWitness<f64>>,
    is_perturbed_metric: bool,
}

fn run_metric_audit(spec: &ProblemSpec, out: &mut Outputs) -> Result<Outcome> {
    let domain = spec.domain();
    let window = sampling_window(domain);
    let sample = window.sample_with(spec.count("samples"), &spec.points);
    if sample.is_empty() {
        return Err(Error::validation("points", "the audit sample is empty"));
    }
    let m = scalar_metric(spec);
    let tol = spec.tol();
    let exact = metric::audit_axioms(&m, &sample, tol)?;
    let witness = if sample.len() >= 3 {
        metric::find_triangle_violation(|x: &f64, y: &f64| m.distance(x, y), &sample, tol)?
    } else {
        None
    };
    let passed = exact.passed;
    out.json(
        "report.json",
        &MetricAuditReport {
            kind: spec.kind,
            distance: spec.expr("D").source(),
            perturbation: spec.expr("P").source(),
            domain: [domain.lo, domain.hi],
            tol,
            sample_size: sample.len(),
            exact_metric: exact.into(),
            distance_triangle_witness: witness,
            is_perturbed_metric: passed,
        },
    )?;
    Ok(Outcome::from_bool(passed))
}

#[derive(Debug, Serialize)]
struct GaugeAuditReport<'a> {
    kind: Kind,
    gauge: &'a str,
    k: f64,
    m_bound: f64,
    eps: f64,
    t_small: f64,
    grid: [f64; 2],
    grid_points: usize,
    audit: AuditSummary,
}

fn run_gauge_audit(spec: &ProblemSpec, out: &mut Outputs) -> Result<Outcome> {
    let g = spec.gauge.as_ref().expect("F is required");
    let config = GaugeAuditConfig {
        k: spec.scalar("k"),
        m_bound: spec.scalar("M"),
        eps: spec.scalar("eps"),
        t_small: spec.scalar("t_small"),
    };
    let (lo, hi, n) = (
        spec.scalar("grid_min"),
        spec.scalar("grid_max"),
        spec.count("grid_points"),
    );
    let grid = logspace(lo, hi, n);
    let audit = audit_gauge(g, &grid, &config)?;
    let passed = audit.passed;

    let mut table = Table::new(vec!["t", "F_t"]);
    for &t in &grid {
        table.push(vec![format_float(t), format_float(g.eval(t)?)]);
    }
    out.json(
        "report.json",
        &GaugeAuditReport {
            kind: spec.kind,
            gauge: g.id(),
            k: config.k,
            m_bound: config.m_bound,
            eps: config.eps,
            t_small: config.t_small,
            grid: [lo, hi],
            grid_points: n,
            audit: audit.into(),
        },
    )?;
    out.csv("trace.csv", &table)?;
    Ok(Outcome::from_bool(passed))
}

#[derive(Debug, Serialize)]
struct CertifyReport<'a> {
    kind: Kind,
    map: &'a str,
    distance: &'a str,
    perturbation: &'a str,
    gauge: &'a str,
    domain: [f64; 2],
    grid: usize,
    tol: f64,
    self_map: AuditSummary,
    certified: bool,
    tau: f64,
    worst_margin: Option<f64>,
    worst_pair: Option<PairWitness>,
    pairs_checked: usize,
    pairs_skipped_zero: usize,
    /// Largest tau the sampled pairs admit.
    tau_max: Option<f64>,
}

fn run_certify(spec: &ProblemSpec, out: &mut Outputs) -> Result<Outcome> {
    let domain = bounded(spec)?;
    let g = spec.gauge.as_ref().expect("F is required");
    vetted_gauge(g)?;
    let (map, m) = (scalar_map(spec), scalar_metric(spec));
    let points = domain.uniform_grid(spec.count("grid"));
    let self_map = map.check_self_map(&points)?;
    let tau = spec.scalar("tau");
    let tol = spec.tol();

    let (cert, tau_max) = if self_map.passed {
        let pairs = cert::cartesian_pairs(&points);
        let report = cert::certify_f_perturbed(&map, &m, g, tau, &pairs, tol)?;
        let tau_max = match cert::estimate_tau_max(&map, &m, g, &pairs) {
            Ok(t) => Some(t),
            Err(Error::NoEligiblePairs) => None,
            Err(e) => return Err(e),
        };
        (report, tau_max)
    } else {
        let refused = CertReport {
            certified: false,
            tau,
            worst_margin: None,
            worst_pair: None,
            pairs_checked: 0,
            pairs_skipped_zero: 0,
        };
        (refused, None)
    };
    let certified = cert.certified;
    out.json(
        "report.json",
        &CertifyReport {
            kind: spec.kind,
            map: spec.expr("T").source(),
            distance: spec.expr("D").source(),
            perturbation: spec.expr("P").source(),
            gauge: g.id(),
            domain: [domain.lo, domain.hi],
            grid: points.len(),
            tol,
            self_map: self_map.into(),
            certified,
            tau: cert.tau,
            worst_margin: cert.worst_margin,
            worst_pair: cert.worst_pair,
            pairs_checked: cert.pairs_checked,
            pairs_skipped_zero: cert.pairs_skipped_zero,
            tau_max,
        },
    )?;
    Ok(Outcome::from_bool(certified))
}

#[derive(Debug, Serialize)]
struct UniquenessProbe {
    starts: Vec<f64>,
    finals: Vec<f64>,
    stop_reasons: Vec<StopReason>,
    all_converged: bool,
    max_pairwise_distance: f64,
    /// All runs converged and end within 10 tol of each other.
    unique: bool,
}

#[derive(Debug, Serialize)]
struct IterateReport<'a> {
    kind: Kind,
    map: &'a str,
    distance: &'a str,
    perturbation: &'a str,
    gauge: Option<&'a str>,
    domain: [f64; 2],
    tol: f64,
    max_iters: usize,
    seed: u64,
    x0: f64,
    stop_reason: StopReason,
    converged: bool,
    iterations: usize,
    x_final: f64,
    /// d(T x_final, x_final)
    fixed_point_residual: Option<f64>,
    rate: Option<f64>,
    tau: Option<f64>,
    gamma_decay: Option<GammaDecay>,
    uniqueness: UniquenessProbe,
}

fn run_iterate(spec: &ProblemSpec, out: &mut Outputs) -> Result<Outcome> {
    let domain = spec.domain();
    let (map, m) = (scalar_map(spec), scalar_metric(spec));
    let gauge = spec.gauge.as_ref();
    if let Some(g) = gauge {
        vetted_gauge(g)?;
    }
    let tol = spec.tol();
    let max_iters = spec.count("max_iters");
    let x0 = spec.scalar("x0");
    let trace = iteration::iterate(&map, &x0, &m, tol, max_iters, gauge)?;
    let x_final = *trace.last();
    let converged = trace.stop_reason.converged();

    let fixed_point_residual = match map.apply(&x_final) {
        Ok(tx) if domain.contains(&tx) => Some(m.exact(&tx, &x_final)?),
        _ => None,
    };
    let tau = spec.opt_scalar("tau");
    let gamma_decay = match (tau, gauge) {
        (Some(tau), Some(g)) => Some(iteration::check_gamma_decay(&trace, g, tau, DECAY_TOL)?),
        _ => None,
    };

    let starts = sampling_window(domain).random_points(spec.count("starts"), spec.seed);
    let probe = iteration::multi_start(&map, &starts, &m, tol, max_iters)?;
    let all_converged = probe.traces.iter().all(|t| t.stop_reason.converged());
    let uniqueness = UniquenessProbe {
        finals: probe.traces.iter().map(|t| *t.last()).collect(),
        stop_reasons: probe.traces.iter().map(|t| t.stop_reason).collect(),
        starts,
        all_converged,
        max_pairwise_distance: probe.max_pairwise_distance,
        unique: all_converged && probe.max_pairwise_distance <= 10.0 * tol,
    };

    let decay_ok = gamma_decay.is_none_or(|d| d.holds);
    out.json(
        "report.json",
        &IterateReport {
            kind: spec.kind,
            map: spec.expr("T").source(),
            distance: spec.expr("D").source(),
            perturbation: spec.expr("P").source(),
            gauge: gauge.map(FGauge::id),
            domain: [domain.lo, domain.hi],
            tol,
            max_iters,
            seed: spec.seed,
            x0,
            stop_reason: trace.stop_reason,
            converged,
            iterations: trace.iterations(),
            x_final,
            fixed_point_residual,
            rate: iteration::estimate_rate(&trace).ok(),
            tau,
            gamma_decay,
            uniqueness,
        },
    )?;
    out.csv("trace.csv", &report::trace_table(&domain, &trace))?;
    Ok(Outcome::from_bool(converged && decay_ok))
}

#[derive(Debug, Serialize)]
struct SeriesReport<'a> {
    kind: Kind,
    map: &'a str,
    distance: &'a str,
    perturbation: &'a str,
    domain: [f64; 2],
    grid: usize,
    n_max: usize,
    a: Vec<f64>,
    partial_sums: Vec<f64>,
    convergent_flag: bool,
    tail_ratio_max: Option<f64>,
    tail_ratio_threshold: f64,
    pairs_used: usize,
}

fn run_series(spec: &ProblemSpec, out: &mut Outputs) -> Result<Outcome> {
    let domain = bounded(spec)?;
    let (map, m) = (scalar_map(spec), scalar_metric(spec));
    let points = domain.uniform_grid(spec.count("grid"));
    let n_max = spec.count("n_max");
    let est = cert::estimate_series(&map, &m, &cert::cartesian_pairs(&points), n_max)?;

    let mut table = Table::new(vec!["n", "a_n", "partial_sum"]);
    for (i, (a, s)) in est.a.iter().zip(&est.partial_sums).enumerate() {
        table.push(vec![(i + 1).to_string(), format_float(*a), format_float(*s)]);
    }
    let flag = est.convergent_flag;
    out.json(
        "report.json",
        &SeriesReport {
            kind: spec.kind,
            map: spec.expr("T").source(),
            distance: spec.expr("D").source(),
            perturbation: spec.expr("P").source(),
            domain: [domain.lo, domain.hi],
            grid: points.len(),
            n_max,
            a: est.a,
            partial_sums: est.partial_sums,
            convergent_flag: flag,
            tail_ratio_max: est.tail_ratio_max,
            tail_ratio_threshold: cert::TAIL_RATIO_THRESHOLD,
            pairs_used: est.pairs_used,
        },
    )?;
    out.csv("trace.csv", &table)?;
    Ok(Outcome::from_bool(flag))
}

#[derive(Debug, Serialize)]
struct LipschitzSummary {
    u_range: [f64; 2],
    samples: usize,
    bound: f64,
    observed: f64,
    /// -ln(observed); `None` when f does not depend on u.
    admissible_tau: Option<f64>,
    audit: AuditSummary,
}

#[derive(Debug, Serialize)]
struct BvpReport<'a> {
    kind: Kind,
    rhs: &'a str,
    u0: &'a str,
    tau: f64,
    n_nodes: usize,
    tol: f64,
    max_iters: usize,
    seed: u64,
    stop_reason: StopReason,
    converged: bool,
    iterations: usize,
    sup_norm_final: f64,
    /// Successive ratios of sup-norm steps.
    step_ratios: Vec<f64>,
    rate: Option<f64>,
    residual: f64,
    /// max_t of the discrete int G(t, s) ds.
    kernel_row_max: f64,
    lipschitz: LipschitzSummary,
    /// (P1)-(P4) for the exact part of the function metric on seeded
    /// random grid functions.
    metric_audit: AuditSummary,
}

fn run_bvp(spec: &ProblemSpec, out: &mut Outputs) -> Result<Outcome> {
    let n = spec.count("n_nodes");
    let tau = spec.scalar("tau");
    let problem = BvpProblem::from_formula(spec.expr("f").clone(), tau)?;
    let u0_expr = spec.expr("u0");
    let u0 = GridFunction::try_from_fn(n, |t| u0_expr.eval(&[t]))?;
    let tol = spec.tol();
    let max_iters = spec.count("max_iters");
    let (u, trace) = bvp::solve_bvp(&problem, &u0, tol, max_iters)?;
    let converged = trace.stop_reason.converged();

    let (lo, hi) = spec.interval("u_range");
    let samples = spec.count("lipschitz_samples").max(2);
    let lipschitz = LipschitzSummary {
        u_range: [lo, hi],
        samples,
        bound: problem.lipschitz_bound(),
        observed: bvp::observed_lipschitz(&problem, (lo, hi), samples)?,
        admissible_tau: bvp::admissible_tau(&problem, (lo, hi), samples)?,
        audit: bvp::lipschitz_audit(&problem, (lo, hi), samples)?.into(),
    };

    let space = GridSpace::new(n)?;
    let functions = space.random_functions(spec.count("metric_samples"), spec.seed, 2.0);
    let metric_audit = metric::audit_axioms(&bvp::function_metric(n)?, &functions, metric::AXIOM_TOLERANCE)?;

    let kernel_row_max = max_row_integral(n)?;
    let step_ratios = trace
        .exact_steps
        .windows(2)
        .take_while(|w| w[0] > cert::ZERO_THRESHOLD)
        .map(|w| w[1] / w[0])
        .collect();

    out.json(
        "report.json",
        &BvpReport {
            kind: spec.kind,
            rhs: spec.expr("f").source(),
            u0: u0_expr.source(),
            tau,
            n_nodes: n,
            tol,
            max_iters,
            seed: spec.seed,
            stop_reason: trace.stop_reason,
            converged,
            iterations: trace.iterations(),
            sup_norm_final: u.sup_norm(),
            step_ratios,
            rate: iteration::estimate_rate(&trace).ok(),
            residual: bvp::residual_check(&u, &problem)?,
            kernel_row_max,
            lipschitz,
            metric_audit: metric_audit.into(),
        },
    )?;
    out.csv("trace.csv", &report::trace_table(&space, &trace))?;
    out.csv("solution.csv", &report::solution_table(&u))?;
    Ok(Outcome::from_bool(converged))
}

fn max_row_integral(n: usize) -> Result<f64> {
    crate::space::grid_nodes(n)
        .into_iter()
        .map(|t| bvp::kernel_row_integral(t, n))
        .try_fold(0.0f64, |m, v| Ok(m.max(v?)))
}
