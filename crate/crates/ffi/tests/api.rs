use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use pfx_ffi::*;

fn cs(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = pfx_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

struct Scalar {
    metric: *mut PfxMetric,
    map: *mut PfxMap,
    gauge: *mut PfxGauge,
}

impl Scalar {
    fn halving() -> Self {
        let mut s = Scalar {
            metric: ptr::null_mut(),
            map: ptr::null_mut(),
            gauge: ptr::null_mut(),
        };
        unsafe {
            assert_eq!(pfx_metric_builtin(cs("quartic").as_ptr(), &mut s.metric), PfxStatus::Ok);
            assert_eq!(pfx_map_new(cs("x/2").as_ptr(), 0.0, 1.0, &mut s.map), PfxStatus::Ok);
            assert_eq!(pfx_gauge_new(cs("ln").as_ptr(), 0.5, &mut s.gauge), PfxStatus::Ok);
        }
        s
    }
}

impl Drop for Scalar {
    fn drop(&mut self) {
        unsafe {
            pfx_metric_free(self.metric);
            pfx_map_free(self.map);
            pfx_gauge_free(self.gauge);
        }
    }
}

#[test]
fn metric_values_and_witness() {
    let s = Scalar::halving();
    let mut d = 0.0;
    unsafe {
        assert_eq!(pfx_metric_distance(s.metric, 0.0, 0.5, &mut d), PfxStatus::Ok);
        assert_eq!(d, 0.5625);
        assert_eq!(pfx_metric_exact(s.metric, 0.0, 0.5, &mut d), PfxStatus::Ok);
        assert_eq!(d, 0.5);

        let pts = [0.0, 1.0 / 3.0, 0.5];
        let (mut found, mut xyz, mut gap) = (false, [0.0; 3], 0.0);
        let st = pfx_metric_triangle_witness(s.metric, pts.as_ptr(), 3, 1e-10, &mut found, xyz.as_mut_ptr(), &mut gap);
        assert_eq!(st, PfxStatus::Ok);
        assert!(found);
        assert_eq!(xyz, [0.0, 0.5, 1.0 / 3.0]);
        assert!((gap - 0.0494).abs() < 5e-4);

        let (mut passed, mut count) = (false, usize::MAX);
        let st = pfx_metric_audit(s.metric, pts.as_ptr(), 3, 1e-10, &mut passed, &mut count);
        assert_eq!(st, PfxStatus::Ok);
        assert!(passed);
        assert_eq!(count, 0);
    }
}

#[test]
fn certify_and_tau_max() {
    let s = Scalar::halving();
    let mut r = PfxCertResult {
        certified: false,
        worst_margin: 0.0,
        worst_x: 0.0,
        worst_y: 0.0,
        pairs_checked: 0,
        pairs_skipped_zero: 0,
    };
    let mut tau = 0.0;
    unsafe {
        let ln2 = std::f64::consts::LN_2;
        assert_eq!(
            pfx_certify(s.map, s.metric, s.gauge, ln2, 50, 1e-12, &mut r),
            PfxStatus::Ok
        );
        assert!(r.certified);
        assert_eq!(r.pairs_checked + r.pairs_skipped_zero, 2500);
        assert_eq!(
            pfx_certify(s.map, s.metric, s.gauge, ln2 + 0.05, 50, 1e-12, &mut r),
            PfxStatus::Ok
        );
        assert!(!r.certified);
        assert_eq!(pfx_tau_max(s.map, s.metric, s.gauge, 50, &mut tau), PfxStatus::Ok);
        assert!(tau >= ln2 && tau < ln2 + 1e-3);
    }
}

#[test]
fn iteration_trace() {
    let s = Scalar::halving();
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(
            pfx_iterate(s.map, s.metric, s.gauge, 1.0, 1e-12, 100, &mut t),
            PfxStatus::Ok
        );
        let n = pfx_trace_len(t);
        assert!(n > 30 && n < 50);

        let mut reason = PfxStopReason::MaxIters;
        assert_eq!(pfx_trace_stop_reason(t, &mut reason), PfxStatus::Ok);
        assert_eq!(reason, PfxStopReason::ToleranceMet);

        let mut len = 0;
        assert_eq!(
            pfx_trace_copy(t, PfxTraceSeries::Points, ptr::null_mut(), 0, &mut len),
            PfxStatus::BufferTooSmall
        );
        assert_eq!(len, n);
        let mut xs = vec![0.0; len];
        assert_eq!(
            pfx_trace_copy(t, PfxTraceSeries::Points, xs.as_mut_ptr(), len, &mut len),
            PfxStatus::Ok
        );
        assert_eq!(xs[0], 1.0);
        assert_eq!(xs[1], 0.5);
        assert!(xs[n - 1] <= 1e-12);

        let mut fg = vec![0.0; n];
        assert_eq!(
            pfx_trace_copy(t, PfxTraceSeries::FGamma, fg.as_mut_ptr(), n, &mut len),
            PfxStatus::Ok
        );
        assert_eq!(len, n - 1);
        assert_eq!(fg[0], 0.5625f64.ln());
        pfx_trace_free(t);
    }
}

#[test]
fn gauges() {
    let mut g = ptr::null_mut();
    let (mut passed, mut count) = (false, 0);
    let mut v = 0.0;
    unsafe {
        assert_eq!(pfx_gauge_new(cs("neg_inv_sqrt").as_ptr(), 0.5, &mut g), PfxStatus::Ok);
        assert_eq!(pfx_gauge_eval(g, 4.0, &mut v), PfxStatus::Ok);
        assert_eq!(v, -0.5);
        assert_eq!(pfx_gauge_eval(g, 0.0, &mut v), PfxStatus::Evaluation);
        assert!(last_error().contains("positive"));
        assert_eq!(
            pfx_gauge_audit(g, 0.75, 1e-12, 10.0, 200, &mut passed, &mut count),
            PfxStatus::Ok
        );
        assert!(passed);
        pfx_gauge_free(g);

        assert_eq!(pfx_gauge_new(cs("-1/t").as_ptr(), 0.5, &mut g), PfxStatus::Ok);
        assert_eq!(
            pfx_gauge_audit(g, 0.5, 1e-12, 10.0, 200, &mut passed, &mut count),
            PfxStatus::Ok
        );
        assert!(!passed);
        assert!(count > 0);
        pfx_gauge_free(g);
    }
}

#[test]
fn bvp_solution() {
    let mut u = vec![1.0; 201];
    let mut r = PfxBvpResult {
        stop_reason: PfxStopReason::MaxIters,
        iterations: 0,
        sup_norm: 1.0,
        residual: 1.0,
    };
    unsafe {
        let st = pfx_bvp_solve(
            cs("((s+0.5)/2)*sin(u)").as_ptr(),
            cs("t").as_ptr(),
            0.2,
            201,
            1e-12,
            100,
            u.as_mut_ptr(),
            &mut r,
        );
        assert_eq!(st, PfxStatus::Ok);
    }
    assert_eq!(r.stop_reason, PfxStopReason::ToleranceMet);
    assert!(r.iterations <= 15);
    assert!(r.sup_norm <= 1e-9);
    assert!(u.iter().all(|v| v.abs() <= 1e-9));
}

#[test]
fn errors_are_reported() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            pfx_metric_new(cs("abs(x-").as_ptr(), ptr::null(), 0.0, 1.0, &mut m),
            PfxStatus::Parse
        );
        assert!(m.is_null());
        assert!(last_error().contains("column"));

        assert_eq!(
            pfx_metric_new(cs("abs(x-z)").as_ptr(), ptr::null(), 0.0, 1.0, &mut m),
            PfxStatus::Parse
        );
        assert_eq!(
            pfx_metric_new(ptr::null(), ptr::null(), 0.0, 1.0, &mut m),
            PfxStatus::NullPointer
        );
        assert_eq!(
            pfx_metric_new(cs("abs(x-y)").as_ptr(), ptr::null(), 1.0, 0.0, &mut m),
            PfxStatus::Validation
        );
        assert_eq!(pfx_metric_builtin(cs("nope").as_ptr(), &mut m), PfxStatus::Validation);

        assert_eq!(
            pfx_metric_new(cs("abs(x-y)").as_ptr(), ptr::null(), 0.0, 1.0, &mut m),
            PfxStatus::Ok
        );
        assert!(pfx_last_error().is_null());
        let mut d = 0.0;
        assert_eq!(pfx_metric_distance(m, 0.0, 2.0, &mut d), PfxStatus::Domain);
        assert_eq!(
            pfx_metric_distance(m, 0.0, 0.5, ptr::null_mut()),
            PfxStatus::NullPointer
        );
        pfx_metric_free(m);
        pfx_metric_free(ptr::null_mut());
    }
}

#[test]
fn run_spec_matches_cli_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = cs(dir.path().to_str().unwrap());
    let ok = cs("[certify]\nT = \"x/2\"\nD = \"abs(x-y) + (x-y)^4\"\nP = \"(x-y)^4\"\nF = \"ln\"\ntau = 0.6931\n");
    let refuted = cs("[certify]\nT = \"x\"\nD = \"abs(x-y)\"\nF = \"ln\"\ntau = 0.1\ngrid = 10\n");
    unsafe {
        assert_eq!(pfx_run_spec(ok.as_ptr(), out.as_ptr()), PfxStatus::Ok);
        assert!(dir.path().join("report.json").exists());
        assert_eq!(pfx_run_spec(refuted.as_ptr(), out.as_ptr()), PfxStatus::Refuted);
        assert_eq!(
            pfx_run_spec(cs("[certify]\n").as_ptr(), out.as_ptr()),
            PfxStatus::Validation
        );
        assert!(last_error().contains("`T`"));
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(pfx_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// The generated header must be valid C (checked when a C compiler is
/// available).
#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/pfx.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "pfx_metric_new",
        "pfx_certify",
        "pfx_trace_copy",
        "pfx_bvp_solve",
        "pfx_run_spec",
        "typedef struct PfxMetric PfxMetric;",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        format!("#include \"{header}\"\nint main(void) {{ return PFX_STATUS_OK; }}\n"),
    )
    .unwrap();
    match Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&src)
        .output()
    {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler; header syntax not checked"),
    }
}
