//! C ABI for `pfx-core`.
//!
//! Objects cross the boundary as opaque handles created by `pfx_*_new` and
//! released by the matching `pfx_*_free`. Every fallible call returns a
//! [`PfxStatus`]; on failure [`pfx_last_error`] describes what went wrong
//! on the calling thread. Results are written through out-pointers, which
//! are left untouched on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use pfx_core::bvp::{self, BvpProblem};
use pfx_core::cert;
use pfx_core::error::Error;
use pfx_core::expr::parse_expr;
use pfx_core::gauge::{audit_gauge, FGauge, GaugeAuditConfig};
use pfx_core::iteration::{self, IterationTrace, StopReason};
use pfx_core::map::SelfMap;
use pfx_core::metric::{self, PerturbedMetric};
use pfx_core::run::run_command;
use pfx_core::space::{logspace, GridFunction, Interval};
use pfx_core::spec::parse_spec;

/// Status codes. Zero is success; `PFX_STATUS_REFUTED` is only returned by
/// [`pfx_run_spec`] and mirrors the command-line exit code 2.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfxStatus {
    Ok = 0,
    NullPointer = 1,
    Refuted = 2,
    InvalidUtf8 = 3,
    Parse = 4,
    Validation = 5,
    Domain = 6,
    Evaluation = 7,
    NoEligiblePairs = 8,
    InsufficientData = 9,
    GaugeRejected = 10,
    Io = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

impl From<&Error> for PfxStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Parse { .. } | Error::UnknownVariable(_) => PfxStatus::Parse,
            Error::Validation { .. }
            | Error::InvalidInput(_)
            | Error::InvalidScale(_)
            | Error::ShapeMismatch { .. } => PfxStatus::Validation,
            Error::Domain(_) | Error::OverflowGuard { .. } | Error::MismatchedBase { .. } => PfxStatus::Domain,
            Error::NegativeExactDistance { .. }
            | Error::NonPositiveArgument(_)
            | Error::EvalDomain { .. }
            | Error::NonFiniteValue { .. } => PfxStatus::Evaluation,
            Error::NoEligiblePairs => PfxStatus::NoEligiblePairs,
            Error::InsufficientData(_) => PfxStatus::InsufficientData,
            Error::GaugeRejected { .. } => PfxStatus::GaugeRejected,
            Error::Io { .. } => PfxStatus::Io,
        }
    }
}

/// Why an iteration stopped.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfxStopReason {
    FixedPoint = 0,
    ToleranceMet = 1,
    MaxIters = 2,
    DomainExit = 3,
}

impl From<StopReason> for PfxStopReason {
    fn from(r: StopReason) -> Self {
        match r {
            StopReason::FixedPoint => PfxStopReason::FixedPoint,
            StopReason::ToleranceMet => PfxStopReason::ToleranceMet,
            StopReason::MaxIters => PfxStopReason::MaxIters,
            StopReason::DomainExit => PfxStopReason::DomainExit,
        }
    }
}

/// A perturbed metric `D = d + P` on a scalar interval.
pub struct PfxMetric(PerturbedMetric<Interval>);

/// A scalar self-map.
pub struct PfxMap(SelfMap<Interval>);

/// An F-gauge.
pub struct PfxGauge(FGauge);

/// A recorded Picard iteration.
pub struct PfxTrace(IterationTrace<f64>);

/// Outcome of [`pfx_certify`]. `worst_margin` is NaN when every pair was
/// skipped.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PfxCertResult {
    pub certified: bool,
    pub worst_margin: f64,
    pub worst_x: f64,
    pub worst_y: f64,
    pub pairs_checked: usize,
    pub pairs_skipped_zero: usize,
}

/// Outcome of [`pfx_bvp_solve`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PfxBvpResult {
    pub stop_reason: PfxStopReason,
    pub iterations: usize,
    pub sup_norm: f64,
    pub residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

struct Failure(PfxStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(PfxStatus::from(&e), e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

/// Runs `body`, translating errors and panics into status codes.
fn guard(body: impl FnOnce() -> FfiResult<PfxStatus>) -> PfxStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {message}"));
            PfxStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PfxStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(PfxStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

fn interval(lo: f64, hi: f64) -> FfiResult<Interval> {
    Ok(Interval::new(lo, hi)?)
}

/// The message for the last failed call on this thread, or NULL. The
/// pointer stays valid until the next `pfx_*` call on the same thread.
#[no_mangle]
pub extern "C" fn pfx_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pfx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a metric on `[lo, hi]` from expressions in `x, y`. `perturbation`
/// may be NULL for P = 0. Bounds may be infinite.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_metric_new(
    distance: *const c_char,
    perturbation: *const c_char,
    lo: f64,
    hi: f64,
    out: *mut *mut PfxMetric,
) -> PfxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let d = parse_expr(str_arg(distance, "distance")?, &["x", "y"])?;
        let p_src = if perturbation.is_null() {
            "0"
        } else {
            str_arg(perturbation, "perturbation")?
        };
        let p = parse_expr(p_src, &["x", "y"])?;
        let m = PerturbedMetric::from_formulas(interval(lo, hi)?, d, p);
        *out = Box::into_raw(Box::new(PfxMetric(m)));
        Ok(PfxStatus::Ok)
    })
}

/// Builtin metrics: `"product"` (|x-y| + x^2 y^4 on the real line),
/// `"quartic"` (|x-y| + (x-y)^4 on [0, 1]) and `"quadratic"`
/// (|x-y| + (x-y)^2 on [0, 1]).
///
/// # Safety
/// `name` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_metric_builtin(name: *const c_char, out: *mut *mut PfxMetric) -> PfxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = match str_arg(name, "name")? {
            "product" => PerturbedMetric::product_perturbed(),
            "quartic" => PerturbedMetric::quartic_perturbed(),
            "quadratic" => PerturbedMetric::quadratic_perturbed(),
            other => {
                return Err(Failure(
                    PfxStatus::Validation,
                    format!("unknown builtin metric `{other}`"),
                ));
            }
        };
        *out = Box::into_raw(Box::new(PfxMetric(m)));
        Ok(PfxStatus::Ok)
    })
}

/// # Safety
/// `m` must be NULL or a handle from `pfx_metric_new`/`pfx_metric_builtin`
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn pfx_metric_free(m: *mut PfxMetric) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// D(x, y).
///
/// # Safety
/// `m` must be a live metric handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_metric_distance(m: *const PfxMetric, x: f64, y: f64, out: *mut f64) -> PfxStatus {
    guard(|| {
        let m = ref_arg(m, "metric")?;
        let out = out_arg(out, "out")?;
        *out = m.0.distance(&x, &y)?;
        Ok(PfxStatus::Ok)
    })
}

/// The exact metric d(x, y) = D(x, y) - P(x, y).
///
/// # Safety
/// `m` must be a live metric handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_metric_exact(m: *const PfxMetric, x: f64, y: f64, out: *mut f64) -> PfxStatus {
    guard(|| {
        let m = ref_arg(m, "metric")?;
        let out = out_arg(out, "out")?;
        *out = metric::eval_exact(&m.0, &x, &y)?;
        Ok(PfxStatus::Ok)
    })
}

/// Audits (P1)-(P4) for the exact metric on `points[0..n]`.
///
/// # Safety
/// `points` must hold `n` readable doubles; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_metric_audit(
    m: *const PfxMetric,
    points: *const f64,
    n: usize,
    tol: f64,
    out_passed: *mut bool,
    out_violations: *mut usize,
) -> PfxStatus {
    guard(|| {
        let m = ref_arg(m, "metric")?;
        if points.is_null() {
            return Err(null("points"));
        }
        let sample = slice::from_raw_parts(points, n);
        let passed = out_arg(out_passed, "out_passed")?;
        let count = out_arg(out_violations, "out_violations")?;
        let report = metric::audit_axioms(&m.0, sample, tol)?;
        *passed = report.passed;
        *count = report.violations.len();
        Ok(PfxStatus::Ok)
    })
}

/// Finds the triple maximizing D(x,y) - D(x,z) - D(z,y) over `points`.
/// `out_found` is false when no excess exceeds `tol`; otherwise
/// `out_xyz` receives x, y, z and `out_gap` the excess.
///
/// # Safety
/// `points` must hold `n` readable doubles, `out_xyz` three writable
/// doubles; other out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_metric_triangle_witness(
    m: *const PfxMetric,
    points: *const f64,
    n: usize,
    tol: f64,
    out_found: *mut bool,
    out_xyz: *mut f64,
    out_gap: *mut f64,
) -> PfxStatus {
    guard(|| {
        let m = ref_arg(m, "metric")?;
        if points.is_null() {
            return Err(null("points"));
        }
        if out_xyz.is_null() {
            return Err(null("out_xyz"));
        }
        let sample = slice::from_raw_parts(points, n);
        let found = out_arg(out_found, "out_found")?;
        let gap = out_arg(out_gap, "out_gap")?;
        let witness = metric::find_triangle_violation(|x: &f64, y: &f64| m.0.distance(x, y), sample, tol)?;
        *found = witness.is_some();
        if let Some(w) = witness {
            let xyz = slice::from_raw_parts_mut(out_xyz, 3);
            xyz.copy_from_slice(&[w.x, w.y, w.z]);
            *gap = w.gap;
        }
        Ok(PfxStatus::Ok)
    })
}

/// A self-map of `[lo, hi]` given as an expression in `x`.
///
/// # Safety
/// `expr` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_map_new(expr: *const c_char, lo: f64, hi: f64, out: *mut *mut PfxMap) -> PfxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let f = parse_expr(str_arg(expr, "expr")?, &["x"])?;
        *out = Box::into_raw(Box::new(PfxMap(SelfMap::from_formula(interval(lo, hi)?, f))));
        Ok(PfxStatus::Ok)
    })
}

/// T(x).
///
/// # Safety
/// `map` must be a live map handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_map_apply(map: *const PfxMap, x: f64, out: *mut f64) -> PfxStatus {
    guard(|| {
        let map = ref_arg(map, "map")?;
        let out = out_arg(out, "out")?;
        *out = map.0.apply(&x)?;
        Ok(PfxStatus::Ok)
    })
}

/// # Safety
/// `map` must be NULL or a live handle from `pfx_map_new`.
#[no_mangle]
pub unsafe extern "C" fn pfx_map_free(map: *mut PfxMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// A gauge: a builtin name (`ln`, `ln_plus_x`, `neg_inv_sqrt`,
/// `ln_quadratic`) or an expression in `t`. `k` is the (F3) exponent
/// claimed for expression gauges and ignored for builtins.
///
/// # Safety
/// `spec` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_gauge_new(spec: *const c_char, k: f64, out: *mut *mut PfxGauge) -> PfxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(spec, "spec")?;
        let g = match FGauge::builtin(text) {
            Some(g) => g,
            None => FGauge::from_formula(parse_expr(text, &["t"])?, k)?,
        };
        *out = Box::into_raw(Box::new(PfxGauge(g)));
        Ok(PfxStatus::Ok)
    })
}

/// F(t) for t > 0.
///
/// # Safety
/// `g` must be a live gauge handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_gauge_eval(g: *const PfxGauge, t: f64, out: *mut f64) -> PfxStatus {
    guard(|| {
        let g = ref_arg(g, "gauge")?;
        let out = out_arg(out, "out")?;
        *out = g.0.eval(t)?;
        Ok(PfxStatus::Ok)
    })
}

/// Audits (F1)-(F3) with exponent `k` on `n` log-spaced points in
/// `[t_min, t_max]`, using M = 10, eps = 1e-2 and t_small = 1e-8.
///
/// # Safety
/// `g` must be a live gauge handle; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_gauge_audit(
    g: *const PfxGauge,
    k: f64,
    t_min: f64,
    t_max: f64,
    n: usize,
    out_passed: *mut bool,
    out_violations: *mut usize,
) -> PfxStatus {
    guard(|| {
        let g = ref_arg(g, "gauge")?;
        let passed = out_arg(out_passed, "out_passed")?;
        let count = out_arg(out_violations, "out_violations")?;
        let config = GaugeAuditConfig::default().with_k(k);
        let report = audit_gauge(&g.0, &logspace(t_min, t_max, n), &config)?;
        *passed = report.passed;
        *count = report.violations.len();
        Ok(PfxStatus::Ok)
    })
}

/// # Safety
/// `g` must be NULL or a live handle from `pfx_gauge_new`.
#[no_mangle]
pub unsafe extern "C" fn pfx_gauge_free(g: *mut PfxGauge) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

unsafe fn grid_pairs(map: &PfxMap, grid: usize) -> FfiResult<Vec<(f64, f64)>> {
    let d = *map.0.space();
    if !(d.lo.is_finite() && d.hi.is_finite()) {
        return Err(Failure(
            PfxStatus::Validation,
            "pair grids need a bounded domain".into(),
        ));
    }
    Ok(cert::cartesian_pairs(&d.uniform_grid(grid)))
}

/// Checks tau + F(D(Tx,Ty)) <= F(D(x,y)) (within `tol`) on the
/// `grid x grid` pairs of the map's domain.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_certify(
    map: *const PfxMap,
    metric: *const PfxMetric,
    gauge: *const PfxGauge,
    tau: f64,
    grid: usize,
    tol: f64,
    out: *mut PfxCertResult,
) -> PfxStatus {
    guard(|| {
        let (map, m, g) = (
            ref_arg(map, "map")?,
            ref_arg(metric, "metric")?,
            ref_arg(gauge, "gauge")?,
        );
        let out = out_arg(out, "out")?;
        let pairs = grid_pairs(map, grid)?;
        let r = cert::certify_f_perturbed(&map.0, &m.0, &g.0, tau, &pairs, tol)?;
        let (wx, wy) = r.worst_pair.as_ref().map_or((f64::NAN, f64::NAN), |w| (w.x, w.y));
        *out = PfxCertResult {
            certified: r.certified,
            worst_margin: r.worst_margin.unwrap_or(f64::NAN),
            worst_x: wx,
            worst_y: wy,
            pairs_checked: r.pairs_checked,
            pairs_skipped_zero: r.pairs_skipped_zero,
        };
        Ok(PfxStatus::Ok)
    })
}

/// The largest tau admitted by the `grid x grid` pairs.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_tau_max(
    map: *const PfxMap,
    metric: *const PfxMetric,
    gauge: *const PfxGauge,
    grid: usize,
    out: *mut f64,
) -> PfxStatus {
    guard(|| {
        let (map, m, g) = (
            ref_arg(map, "map")?,
            ref_arg(metric, "metric")?,
            ref_arg(gauge, "gauge")?,
        );
        let out = out_arg(out, "out")?;
        *out = cert::estimate_tau_max(&map.0, &m.0, &g.0, &grid_pairs(map, grid)?)?;
        Ok(PfxStatus::Ok)
    })
}

/// Picard iteration from `x0`. `gauge` may be NULL; when given, F(gamma_n)
/// is recorded.
///
/// # Safety
/// `map` and `metric` must be live; `gauge` live or NULL; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_iterate(
    map: *const PfxMap,
    metric: *const PfxMetric,
    gauge: *const PfxGauge,
    x0: f64,
    tol: f64,
    max_iters: usize,
    out: *mut *mut PfxTrace,
) -> PfxStatus {
    guard(|| {
        let (map, m) = (ref_arg(map, "map")?, ref_arg(metric, "metric")?);
        let g = gauge.as_ref().map(|g| &g.0);
        let out = out_arg(out, "out")?;
        let trace = iteration::iterate(&map.0, &x0, &m.0, tol, max_iters, g)?;
        *out = Box::into_raw(Box::new(PfxTrace(trace)));
        Ok(PfxStatus::Ok)
    })
}

/// Number of iterates x_0..x_N (one more than the number of steps).
///
/// # Safety
/// `t` must be a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn pfx_trace_len(t: *const PfxTrace) -> usize {
    t.as_ref().map_or(0, |t| t.0.points.len())
}

/// # Safety
/// `t` must be a live trace handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_trace_stop_reason(t: *const PfxTrace, out: *mut PfxStopReason) -> PfxStatus {
    guard(|| {
        let t = ref_arg(t, "trace")?;
        *out_arg(out, "out")? = t.0.stop_reason.into();
        Ok(PfxStatus::Ok)
    })
}

/// Which series [`pfx_trace_copy`] reads.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfxTraceSeries {
    /// x_0..x_N
    Points = 0,
    /// gamma_n = D(x_{n+1}, x_n)
    Gamma = 1,
    /// d(x_{n+1}, x_n)
    ExactSteps = 2,
    /// F(gamma_n), while recorded
    FGamma = 3,
}

/// Copies a series into `buf` (capacity `cap`) and stores its length in
/// `out_len`. Returns `PFX_STATUS_BUFFER_TOO_SMALL` (with `out_len` set)
/// when `cap` is short; `buf` may then be NULL.
///
/// # Safety
/// `t` must be a live trace; `buf` must hold `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pfx_trace_copy(
    t: *const PfxTrace,
    series: PfxTraceSeries,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> PfxStatus {
    guard(|| {
        let t = &ref_arg(t, "trace")?.0;
        let data = match series {
            PfxTraceSeries::Points => &t.points,
            PfxTraceSeries::Gamma => &t.gamma,
            PfxTraceSeries::ExactSteps => &t.exact_steps,
            PfxTraceSeries::FGamma => &t.f_gamma,
        };
        *out_arg(out_len, "out_len")? = data.len();
        if cap < data.len() {
            return Err(Failure(
                PfxStatus::BufferTooSmall,
                format!("need {} doubles, got {cap}", data.len()),
            ));
        }
        if !data.is_empty() {
            if buf.is_null() {
                return Err(null("buf"));
            }
            slice::from_raw_parts_mut(buf, data.len()).copy_from_slice(data);
        }
        Ok(PfxStatus::Ok)
    })
}

/// # Safety
/// `t` must be NULL or a live handle from `pfx_iterate`.
#[no_mangle]
pub unsafe extern "C" fn pfx_trace_free(t: *mut PfxTrace) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Solves -u'' = f(t, u), u(0) = u(1) = 0 by Picard iteration of the Green
/// operator. `f` is an expression in `s, u`; `u0` an expression in `t`
/// (NULL for u0 = 0). The solution on the `n_nodes` uniform nodes is
/// written to `out_u`.
///
/// # Safety
/// Strings must be NUL-terminated; `out_u` must hold `n_nodes` writable
/// doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pfx_bvp_solve(
    f: *const c_char,
    u0: *const c_char,
    tau: f64,
    n_nodes: usize,
    tol: f64,
    max_iters: usize,
    out_u: *mut f64,
    out: *mut PfxBvpResult,
) -> PfxStatus {
    guard(|| {
        let rhs = parse_expr(str_arg(f, "f")?, &["s", "u"])?;
        let start = if u0.is_null() {
            parse_expr("0", &["t"])?
        } else {
            parse_expr(str_arg(u0, "u0")?, &["t"])?
        };
        if out_u.is_null() {
            return Err(null("out_u"));
        }
        let out = out_arg(out, "out")?;
        let problem = BvpProblem::from_formula(rhs, tau)?;
        let u0 = GridFunction::try_from_fn(n_nodes, |t| start.eval(&[t]))?;
        let (u, trace) = bvp::solve_bvp(&problem, &u0, tol, max_iters)?;
        let residual = bvp::residual_check(&u, &problem).unwrap_or(f64::NAN);
        slice::from_raw_parts_mut(out_u, n_nodes).copy_from_slice(u.values());
        *out = PfxBvpResult {
            stop_reason: trace.stop_reason.into(),
            iterations: trace.iterations(),
            sup_norm: u.sup_norm(),
            residual,
        };
        Ok(PfxStatus::Ok)
    })
}

/// Parses and runs a spec document, writing outputs into `out_dir` exactly
/// as the `pfx` command does. Returns `PFX_STATUS_OK` when the spec is
/// affirmed and `PFX_STATUS_REFUTED` when it is refuted.
///
/// # Safety
/// Both strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pfx_run_spec(spec_text: *const c_char, out_dir: *const c_char) -> PfxStatus {
    guard(|| {
        let spec = parse_spec(str_arg(spec_text, "spec_text")?)?;
        let dir = str_arg(out_dir, "out_dir")?;
        let result = run_command(&spec, Path::new(dir))?;
        Ok(match result.outcome.exit_code() {
            0 => PfxStatus::Ok,
            _ => PfxStatus::Refuted,
        })
    })
}
