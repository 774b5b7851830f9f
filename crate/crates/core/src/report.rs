//! Bit-stable serialization: JSON with every float printed to 17
//! significant digits, CSV with a header row and LF line endings.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

use crate::error::{Error, Result};
use crate::iteration::IterationTrace;
use crate::space::{GridFunction, Space};

/// `{:.16e}`: one leading digit and sixteen after the point.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

/// serde_json's compact output (the trait defaults), except for floats. Non-finite floats never
/// reach `write_f64`: serde_json turns them into `null`.
struct FixedDigits;

impl Formatter for FixedDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, FixedDigits);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::InvalidInput(format!("report serialization: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = to_json(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A CSV table built in memory; rows are already-formatted cells.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let wrap = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
        w.write_record(&self.header).map_err(wrap)?;
        for row in &self.rows {
            w.write_record(row).map_err(wrap)?;
        }
        w.into_inner()
            .map_err(|e| Error::InvalidInput(format!("csv: {}", e.error())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

/// `n, x_repr, gamma_n, d_n, F_gamma_n`, one row per iterate. The last
/// iterate has no outgoing step, so its step cells are empty, as are
/// F cells once gauge recording stopped.
pub fn trace_table<S: Space>(space: &S, trace: &IterationTrace<S::Point>) -> Table {
    let mut t = Table::new(vec!["n", "x_repr", "gamma_n", "d_n", "F_gamma_n"]);
    for (n, x) in trace.points.iter().enumerate() {
        t.push(vec![
            n.to_string(),
            format_float(space.repr(x)),
            format_opt(trace.gamma.get(n).copied()),
            format_opt(trace.exact_steps.get(n).copied()),
            format_opt(trace.f_gamma.get(n).copied()),
        ]);
    }
    t
}

/// `t, u` on the grid nodes.
pub fn solution_table(u: &GridFunction) -> Table {
    let mut t = Table::new(vec!["t", "u"]);
    for (x, v) in u.nodes().into_iter().zip(u.values()) {
        t.push(vec![format_float(x), format_float(*v)]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iteration::StopReason;
    use crate::space::Interval;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        assert_eq!(format_float(-2.5e-300), "-2.5000000000000000e-300");
        assert_eq!(format_float(f64::NAN), "");
        for v in [0.1, 1.0 / 3.0, std::f64::consts::PI, 1e-310, 6.02e23] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[derive(Serialize)]
    struct Sample {
        a: f64,
        b: Option<f64>,
        c: f64,
        name: &'static str,
        n: u32,
    }

    #[test]
    fn json_floats_and_nulls() {
        let s = Sample {
            a: 0.5,
            b: None,
            c: f64::INFINITY,
            name: "x",
            n: 3,
        };
        assert_eq!(
            to_json(&s).unwrap(),
            "{\"a\":5.0000000000000000e-1,\"b\":null,\"c\":null,\"name\":\"x\",\"n\":3}\n"
        );
        let back: serde_json::Value = serde_json::from_str(&to_json(&s).unwrap()).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.5));
    }

    #[test]
    fn trace_csv_layout() {
        let trace = IterationTrace {
            points: vec![1.0, 0.5, 0.25],
            gamma: vec![0.5, 0.25],
            perturbation: vec![0.0, 0.0],
            exact_steps: vec![0.5, 0.25],
            f_gamma: vec![0.5f64.ln()],
            stop_reason: StopReason::MaxIters,
        };
        let bytes = trace_table(&Interval::unit(), &trace).to_bytes().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(lines[0], "n,x_repr,gamma_n,d_n,F_gamma_n");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[4], "");
        assert!(lines[2].ends_with(','));
        assert_eq!(lines[3], "2,2.5000000000000000e-1,,,");
        assert!(!text.contains('\r'));
    }
}
