//! Problem spec files.
//!
//! A spec is a TOML document with a single section naming the problem kind
//! and one `key = value` per line:
//!
//! ```toml
//! # halving map, certified with F = ln
//! [certify]
//! T = "x/2"
//! D = "abs(x-y) + (x-y)^4"
//! P = "(x-y)^4"
//! F = "ln"
//! tau = 0.6931
//! ```
//!
//! Expressions are strings in the closed language of [`crate::expr`].
//! Unknown keys, missing required keys and out-of-range numbers are
//! rejected before anything runs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use toml::{Spanned, Value};

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Formula};
use crate::gauge::FGauge;
use crate::space::{validate_node_count, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    MetricAudit,
    GaugeAudit,
    Certify,
    Iterate,
    Series,
    Bvp,
}

impl Kind {
    pub const ALL: [Kind; 6] = [
        Kind::MetricAudit,
        Kind::GaugeAudit,
        Kind::Certify,
        Kind::Iterate,
        Kind::Series,
        Kind::Bvp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::MetricAudit => "metric_audit",
            Kind::GaugeAudit => "gauge_audit",
            Kind::Certify => "certify",
            Kind::Iterate => "iterate",
            Kind::Series => "series",
            Kind::Bvp => "bvp",
        }
    }

    fn keys(self) -> &'static [Key] {
        match self {
            Kind::MetricAudit => METRIC_AUDIT,
            Kind::GaugeAudit => GAUGE_AUDIT,
            Kind::Certify => CERTIFY,
            Kind::Iterate => ITERATE,
            Kind::Series => SERIES,
            Kind::Bvp => BVP,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::validation("kind", format!("unknown problem kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy)]
enum Ty {
    /// Expression string over the listed variables.
    Expr(&'static [&'static str]),
    /// Builtin gauge name or expression in `t`.
    Gauge,
    /// Any finite number.
    Number,
    /// Finite and > 0.
    Positive,
    /// Integer >= 1.
    Count,
    /// Integer >= 0.
    Size,
    /// Odd integer >= 3.
    Nodes,
    /// Integer >= 0.
    Seed,
    /// `[lo, hi]`, lo < hi; bounds may be infinite.
    Interval,
    /// Array of finite numbers.
    Points,
}

#[derive(Debug, Clone, Copy)]
enum Default {
    Required,
    Optional,
    Num(f64),
    Text(&'static str),
    Pair(f64, f64),
    /// The points 0, 1/3 and 1/2.
    SpecialPoints,
}

#[derive(Debug, Clone, Copy)]
struct Key {
    name: &'static str,
    ty: Ty,
    default: Default,
}

const fn key(name: &'static str, ty: Ty, default: Default) -> Key {
    Key { name, ty, default }
}

const XY: &[&str] = &["x", "y"];
const X: &[&str] = &["x"];

const METRIC_AUDIT: &[Key] = &[
    key("D", Ty::Expr(XY), Default::Required),
    key("P", Ty::Expr(XY), Default::Text("0")),
    key("domain", Ty::Interval, Default::Pair(0.0, 1.0)),
    key("samples", Ty::Size, Default::Num(41.0)),
    key("points", Ty::Points, Default::SpecialPoints),
    key("tol", Ty::Positive, Default::Num(1e-10)),
    key("seed", Ty::Seed, Default::Num(0.0)),
];

const GAUGE_AUDIT: &[Key] = &[
    key("F", Ty::Gauge, Default::Required),
    key("k", Ty::Positive, Default::Num(0.5)),
    key("M", Ty::Positive, Default::Num(10.0)),
    key("eps", Ty::Positive, Default::Num(1e-2)),
    key("t_small", Ty::Positive, Default::Num(1e-8)),
    key("grid_min", Ty::Positive, Default::Num(1e-12)),
    key("grid_max", Ty::Positive, Default::Num(10.0)),
    key("grid_points", Ty::Count, Default::Num(200.0)),
    key("tol", Ty::Positive, Default::Num(1e-12)),
    key("seed", Ty::Seed, Default::Num(0.0)),
];

const CERTIFY: &[Key] = &[
    key("T", Ty::Expr(X), Default::Required),
    key("D", Ty::Expr(XY), Default::Required),
    key("P", Ty::Expr(XY), Default::Text("0")),
    key("F", Ty::Gauge, Default::Required),
    key("k", Ty::Positive, Default::Num(0.5)),
    key("tau", Ty::Positive, Default::Required),
    key("domain", Ty::Interval, Default::Pair(0.0, 1.0)),
    key("grid", Ty::Count, Default::Num(200.0)),
    key("tol", Ty::Positive, Default::Num(1e-12)),
    key("seed", Ty::Seed, Default::Num(0.0)),
];

const ITERATE: &[Key] = &[
    key("T", Ty::Expr(X), Default::Required),
    key("D", Ty::Expr(XY), Default::Required),
    key("P", Ty::Expr(XY), Default::Text("0")),
    key("domain", Ty::Interval, Default::Pair(0.0, 1.0)),
    key("x0", Ty::Number, Default::Required),
    key("max_iters", Ty::Count, Default::Num(10_000.0)),
    key("F", Ty::Gauge, Default::Optional),
    key("k", Ty::Positive, Default::Num(0.5)),
    key("tau", Ty::Positive, Default::Optional),
    key("starts", Ty::Count, Default::Num(10.0)),
    key("tol", Ty::Positive, Default::Num(1e-12)),
    key("seed", Ty::Seed, Default::Num(0.0)),
];

const SERIES: &[Key] = &[
    key("T", Ty::Expr(X), Default::Required),
    key("D", Ty::Expr(XY), Default::Required),
    key("P", Ty::Expr(XY), Default::Text("0")),
    key("domain", Ty::Interval, Default::Pair(0.0, 1.0)),
    key("grid", Ty::Count, Default::Num(200.0)),
    key("n_max", Ty::Count, Default::Num(10.0)),
    key("tol", Ty::Positive, Default::Num(1e-12)),
    key("seed", Ty::Seed, Default::Num(0.0)),
];

const BVP: &[Key] = &[
    key("f", Ty::Expr(&["s", "u"]), Default::Required),
    key("u0", Ty::Expr(&["t"]), Default::Text("0")),
    key("tau", Ty::Positive, Default::Required),
    key("n_nodes", Ty::Nodes, Default::Num(201.0)),
    key("max_iters", Ty::Count, Default::Num(10_000.0)),
    key("u_range", Ty::Interval, Default::Pair(-2.0, 2.0)),
    key("lipschitz_samples", Ty::Count, Default::Num(41.0)),
    key("metric_samples", Ty::Count, Default::Num(50.0)),
    key("tol", Ty::Positive, Default::Num(1e-12)),
    key("seed", Ty::Seed, Default::Num(0.0)),
];

/// A fully validated problem description.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub kind: Kind,
    /// Parsed expressions by key (`D`, `P`, `T`, `f`, `u0`, and `F` when it
    /// is not a builtin name).
    pub expressions: BTreeMap<String, Formula>,
    /// Numeric parameters by key, defaults filled in.
    pub scalars: BTreeMap<String, f64>,
    /// Interval-valued parameters (`domain`, `u_range`).
    pub intervals: BTreeMap<String, (f64, f64)>,
    pub gauge: Option<FGauge>,
    /// Audit points added to the `metric_audit` grid.
    pub points: Vec<f64>,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn expr(&self, name: &str) -> &Formula {
        self.expressions
            .get(name)
            .unwrap_or_else(|| panic!("spec has no expression `{name}`"))
    }

    pub fn scalar(&self, name: &str) -> f64 {
        self.scalars[name]
    }

    pub fn opt_scalar(&self, name: &str) -> Option<f64> {
        self.scalars.get(name).copied()
    }

    pub fn count(&self, name: &str) -> usize {
        self.scalar(name) as usize
    }

    pub fn tol(&self) -> f64 {
        self.scalar("tol")
    }

    pub fn interval(&self, name: &str) -> (f64, f64) {
        self.intervals[name]
    }

    /// The scalar domain; every kind except `gauge_audit` and `bvp` has one.
    pub fn domain(&self) -> Interval {
        let (lo, hi) = self.interval("domain");
        Interval { lo, hi }
    }

    pub fn set_tol(&mut self, tol: f64) -> Result<()> {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(Error::validation("tol", format!("must be positive, got {tol}")));
        }
        self.scalars.insert("tol".into(), tol);
        Ok(())
    }
}

type Section = BTreeMap<Spanned<String>, Spanned<Value>>;

/// Parses and validates a spec document.
pub fn parse_spec(text: &str) -> Result<ProblemSpec> {
    let doc: BTreeMap<Spanned<String>, Spanned<Section>> = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    if doc.len() > 1 {
        // keys come back sorted; point at whichever header appears last
        let last = doc.keys().map(|k| k.span().start).max().unwrap_or(0);
        return Err(parse_error(text, last, "only one section is allowed"));
    }
    let Some((name, body)) = doc.into_iter().next() else {
        return Err(parse_error(text, text.len(), "missing `[kind]` section header"));
    };
    let kind: Kind = name.get_ref().parse().map_err(|_| {
        parse_error(
            text,
            name.span().start,
            &format!("unknown problem kind `{}`", name.get_ref()),
        )
    })?;
    let body = body.into_inner();
    let schema = kind.keys();

    for k in body.keys() {
        if !schema.iter().any(|s| s.name == k.get_ref()) {
            return Err(parse_error(
                text,
                k.span().start,
                &format!("unknown key `{}` for {kind}", k.get_ref()),
            ));
        }
    }

    let mut spec = ProblemSpec {
        kind,
        expressions: BTreeMap::new(),
        scalars: BTreeMap::new(),
        intervals: BTreeMap::new(),
        gauge: None,
        points: Vec::new(),
        seed: 0,
    };
    let lookup = |name: &str| body.iter().find(|(k, _)| k.get_ref() == name).map(|(_, v)| v);
    let mut gauge_source = None;

    for k in schema {
        let Some(value) = lookup(k.name) else {
            match k.default {
                Default::Required => return Err(Error::validation(k.name, "required")),
                Default::Optional => {}
                Default::SpecialPoints => spec.points = vec![0.0, 1.0 / 3.0, 0.5],
                Default::Num(_) if matches!(k.ty, Ty::Seed) => {}
                Default::Num(v) => {
                    spec.scalars.insert(k.name.into(), v);
                }
                Default::Text(src) => {
                    let Ty::Expr(vars) = k.ty else { unreachable!() };
                    spec.expressions.insert(k.name.into(), parse_expr(src, vars)?);
                }
                Default::Pair(lo, hi) => {
                    spec.intervals.insert(k.name.into(), (lo, hi));
                }
            }
            continue;
        };
        match k.ty {
            Ty::Expr(vars) => {
                let f = expression(text, k.name, value, vars)?;
                spec.expressions.insert(k.name.into(), f);
            }
            Ty::Gauge => gauge_source = Some(value),
            Ty::Seed => spec.seed = seed(value)?,
            Ty::Number | Ty::Positive | Ty::Count | Ty::Size | Ty::Nodes => {
                spec.scalars.insert(k.name.into(), number(k, value)?);
            }
            Ty::Interval => {
                spec.intervals.insert(k.name.into(), interval(k.name, value)?);
            }
            Ty::Points => spec.points = points(k.name, value)?,
        }
    }

    if let Some(value) = gauge_source {
        let k = spec.opt_scalar("k").unwrap_or(0.5);
        if !(k < 1.0) {
            return Err(Error::validation("k", format!("must lie in (0, 1), got {k}")));
        }
        let name = string(value, "F")?;
        spec.gauge = Some(match FGauge::builtin(name) {
            Some(g) => g,
            None => {
                let f = expression(text, "F", value, &["t"])?;
                spec.expressions.insert("F".into(), f.clone());
                FGauge::from_formula(f, k)?
            }
        });
    }

    cross_check(&spec)?;
    Ok(spec)
}

fn cross_check(spec: &ProblemSpec) -> Result<()> {
    if let Some(&(lo, hi)) = spec.intervals.get("domain") {
        if let Some(x0) = spec.opt_scalar("x0") {
            if !(lo <= x0 && x0 <= hi) {
                return Err(Error::validation("x0", format!("{x0} lies outside [{lo}, {hi}]")));
            }
        }
    }
    if spec.kind == Kind::GaugeAudit {
        let (lo, hi) = (spec.scalar("grid_min"), spec.scalar("grid_max"));
        if !(lo < hi) {
            return Err(Error::validation("grid_max", "must exceed grid_min"));
        }
    }
    if spec.kind == Kind::Iterate && spec.opt_scalar("tau").is_some() && spec.gauge.is_none() {
        return Err(Error::validation("F", "required when tau is given"));
    }
    Ok(())
}

fn string<'a>(value: &'a Spanned<Value>, field: &str) -> Result<&'a str> {
    value
        .get_ref()
        .as_str()
        .ok_or_else(|| Error::validation(field, format!("expected a string, got {}", value.get_ref().type_str())))
}

/// Parses an expression value; syntax errors are located in the file.
fn expression(text: &str, field: &str, value: &Spanned<Value>, vars: &[&str]) -> Result<Formula> {
    let src = string(value, field)?;
    parse_expr(src, vars).map_err(|e| match e {
        Error::Parse { column, message, .. } => {
            // the span starts at the opening quote; columns inside the
            // string are exact for single-line strings without escapes
            let (line, col) = line_col(text, value.span().start);
            let lead = src.len() - src.trim_start().len();
            Error::Parse {
                line,
                column: col + 1 + lead + column - 1,
                message: format!("in `{field}`: {message}"),
            }
        }
        Error::UnknownVariable(v) => {
            Error::validation(field, format!("unknown variable `{v}` (allowed: {})", vars.join(", ")))
        }
        other => other,
    })
}

fn number(k: &Key, value: &Spanned<Value>) -> Result<f64> {
    let v = value.get_ref();
    let field = k.name;
    let integer = match v {
        Value::Integer(i) => Some(*i),
        _ => None,
    };
    let x = match v {
        Value::Integer(i) => *i as f64,
        Value::Float(f) => *f,
        other => {
            return Err(Error::validation(
                field,
                format!("expected a number, got {}", other.type_str()),
            ));
        }
    };
    let need_int = |min: i64| -> Result<f64> {
        match integer {
            Some(i) if i >= min => Ok(i as f64),
            Some(i) => Err(Error::validation(field, format!("must be at least {min}, got {i}"))),
            None => Err(Error::validation(field, format!("expected an integer, got {x}"))),
        }
    };
    match k.ty {
        Ty::Number if x.is_finite() => Ok(x),
        Ty::Number => Err(Error::validation(field, format!("must be finite, got {x}"))),
        Ty::Positive if x > 0.0 && x.is_finite() => Ok(x),
        Ty::Positive => Err(Error::validation(field, format!("must be positive, got {x}"))),
        Ty::Count => need_int(1),
        Ty::Size => need_int(0),
        Ty::Nodes => {
            let n = need_int(3)?;
            validate_node_count(n as usize)?;
            Ok(n)
        }
        _ => unreachable!("not a scalar key"),
    }
}

fn seed(value: &Spanned<Value>) -> Result<u64> {
    match value.get_ref() {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        other => Err(Error::validation(
            "seed",
            format!("expected a nonnegative integer, got {other}"),
        )),
    }
}

fn float(v: &Value) -> Option<f64> {
    match v {
        Value::Integer(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

fn interval(field: &str, value: &Spanned<Value>) -> Result<(f64, f64)> {
    let bad = || Error::validation(field, "expected [lo, hi] with lo < hi");
    let arr = value.get_ref().as_array().ok_or_else(bad)?;
    match arr.as_slice() {
        [a, b] => {
            let (lo, hi) = (float(a).ok_or_else(bad)?, float(b).ok_or_else(bad)?);
            if lo < hi {
                Ok((lo, hi))
            } else {
                Err(bad())
            }
        }
        _ => Err(bad()),
    }
}

fn points(field: &str, value: &Spanned<Value>) -> Result<Vec<f64>> {
    let bad = || Error::validation(field, "expected an array of finite numbers");
    value
        .get_ref()
        .as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|v| float(v).filter(|x| x.is_finite()).ok_or_else(bad))
        .collect()
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn parse_error(text: &str, offset: usize, message: &str) -> Error {
    let (line, column) = line_col(text, offset);
    Error::Parse {
        line,
        column,
        message: message.to_string(),
    }
}

fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let offset = e.span().map_or(0, |s| s.start);
    parse_error(text, offset, e.message().trim())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HALVING: &str = r#"
# halving map
[certify]
T = "x/2"
D = "abs(x-y) + (x-y)^4"
P = "(x-y)^4"
F = "ln(t)"
tau = 0.6931
"#;

    #[test]
    #[allow(clippy::approx_constant)]
    fn certify_spec() {
        let spec = parse_spec(HALVING).unwrap();
        assert_eq!(spec.kind, Kind::Certify);
        assert_eq!(spec.scalar("tau"), 0.6931);
        assert_eq!(spec.count("grid"), 200);
        assert_eq!(spec.domain(), Interval::unit());
        assert_eq!(spec.expr("T").eval(&[0.5]).unwrap(), 0.25);
        assert_eq!(spec.expr("D").eval(&[0.0, 0.5]).unwrap(), 0.5625);
        let g = spec.gauge.as_ref().unwrap();
        assert_eq!(g.id(), "ln(t)");
        assert_eq!(g.eval(1.0).unwrap(), 0.0);
        assert_eq!(spec.seed, 0);
        assert_eq!(spec.tol(), 1e-12);
    }

    #[test]
    fn builtin_gauge_name() {
        let spec = parse_spec(&HALVING.replace("\"ln(t)\"", "\"ln_plus_x\"")).unwrap();
        assert_eq!(spec.gauge.unwrap().id(), "ln_plus_x");
        assert!(!spec.expressions.contains_key("F"));
    }

    #[test]
    fn missing_tau() {
        let text = HALVING.replace("tau = 0.6931\n", "");
        match parse_spec(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "tau"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_tau() {
        let text = HALVING.replace("0.6931", "-1");
        assert!(matches!(parse_spec(&text), Err(Error::Validation { field, .. }) if field == "tau"));
    }

    #[test]
    fn unknown_key_is_located() {
        let text = HALVING.replace("tau = 0.6931", "tau = 0.6931\ntua = 1");
        match parse_spec(&text) {
            Err(Error::Parse { line, column, message }) => {
                assert_eq!((line, column), (9, 1));
                assert!(message.contains("tua"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn expression_error_is_located() {
        let text = HALVING.replace("\"x/2\"", "\"x / * 2\"");
        match parse_spec(&text) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (4, 10)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn toml_syntax_error_is_located() {
        match parse_spec("[certify]\nT = \"x/2\nD = 1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_variable() {
        let text = HALVING.replace("\"x/2\"", "\"y/2\"");
        assert!(matches!(parse_spec(&text), Err(Error::Validation { field, .. }) if field == "T"));
    }

    #[test]
    fn header_rules() {
        assert!(matches!(parse_spec("# nothing\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_spec("[solve]\n"), Err(Error::Parse { line: 1, .. })));
        let two = "[series]\nT = \"x\"\nD = \"abs(x-y)\"\n[bvp]\n";
        assert!(matches!(parse_spec(two), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn bvp_spec() {
        let text = "[bvp]\nf = \"((s+0.5)/2)*sin(u)\"\nu0 = \"t\"\ntau = 0.2\n";
        let spec = parse_spec(text).unwrap();
        assert_eq!(spec.count("n_nodes"), 201);
        assert_eq!(spec.interval("u_range"), (-2.0, 2.0));
        assert_eq!(spec.expr("u0").eval(&[0.25]).unwrap(), 0.25);

        let even = format!("{text}n_nodes = 200\n");
        assert!(matches!(parse_spec(&even), Err(Error::Validation { field, .. }) if field == "n_nodes"));
        let float = format!("{text}n_nodes = 201.0\n");
        assert!(matches!(parse_spec(&float), Err(Error::Validation { field, .. }) if field == "n_nodes"));
    }

    #[test]
    fn iterate_checks() {
        let base = "[iterate]\nT = \"x/2\"\nD = \"abs(x-y)\"\n";
        assert!(parse_spec(&format!("{base}x0 = 1\n")).is_ok());
        assert!(matches!(
            parse_spec(&format!("{base}x0 = 3\n")),
            Err(Error::Validation { field, .. }) if field == "x0"
        ));
        assert!(matches!(
            parse_spec(&format!("{base}x0 = 1\ntau = 0.5\n")),
            Err(Error::Validation { field, .. }) if field == "F"
        ));
        let spec = parse_spec(&format!("{base}x0 = 1\ndomain = [-inf, inf]\n")).unwrap();
        assert_eq!(spec.domain(), Interval::real_line());
    }

    #[test]
    fn tol_override() {
        let mut spec = parse_spec(HALVING).unwrap();
        spec.set_tol(1e-6).unwrap();
        assert_eq!(spec.tol(), 1e-6);
        assert!(spec.set_tol(0.0).is_err());
        let seeded = parse_spec(&format!("{HALVING}seed = 9007199254740993\n")).unwrap();
        assert_eq!(seeded.seed, 9007199254740993);
    }
}
