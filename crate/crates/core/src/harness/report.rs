//! CSV rows and the JSON summary. Floats are written with 17 significant digits so files are
//! byte-stable and reload to the same values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::{FitResult, SweepRow};
use crate::error::{Error, Result};
use crate::phasekit::PhaseConstants;

pub const CSV_HEADER: [&str; 7] = ["lambda", "re", "im", "abs", "method", "err_est", "wall_ms"];

pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn parse_float(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::InvalidConfig(format!("bad number '{s}'")))
}

pub fn write_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            format_float(r.lambda),
            format_float(r.re),
            format_float(r.im),
            format_float(r.abs),
            r.method.clone(),
            format_float(r.err_est),
            format_float(r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(String::from).collect();
    if header != CSV_HEADER {
        return Err(Error::InvalidConfig(format!("unexpected CSV header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let abs = parse_float(&rec[3])?;
        rows.push(SweepRow {
            lambda: parse_float(&rec[0])?,
            re: parse_float(&rec[1])?,
            im: parse_float(&rec[2])?,
            abs,
            method: rec[4].to_string(),
            err_est: parse_float(&rec[5])?,
            wall_ms: parse_float(&rec[6])?,
            error: abs.is_nan().then(|| "failed".to_string()),
        });
    }
    Ok(rows)
}

/// Summary file contents.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub config: Value,
    pub constants: Option<PhaseConstants>,
    pub fits: BTreeMap<String, FitResult>,
    pub checks: BTreeMap<String, bool>,
    pub details: Value,
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap_or_default()),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, e) in a.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, e, indent + 1);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(o) if o.is_empty() => out.push_str("{}"),
        Value::Object(o) => {
            out.push_str("{\n");
            for (i, (k, e)) in o.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).unwrap_or_default());
                out.push_str(": ");
                write_value(out, e, indent + 1);
                out.push_str(if i + 1 < o.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Pretty JSON with sorted keys and every float in `{:.16e}` form. Non-finite floats become `null`.
pub fn to_json_string<T: Serialize>(v: &T) -> Result<String> {
    let value = serde_json::to_value(v)?;
    let mut out = String::new();
    write_value(&mut out, &value, 0);
    out.push('\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(v: &T, path: &Path) -> Result<()> {
    fs::write(path, to_json_string(v)?)?;
    Ok(())
}

/// Writes `rows` to `csv_path` and `summary` next to it with a `.json` extension.
pub fn write_report(rows: &[SweepRow], summary: &Summary, csv_path: &Path) -> Result<(PathBuf, PathBuf)> {
    let json_path = csv_path.with_extension("json");
    write_csv(rows, csv_path)?;
    write_json(summary, &json_path)?;
    Ok((csv_path.to_path_buf(), json_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(l: f64, re: f64) -> SweepRow {
        SweepRow {
            lambda: l,
            re,
            im: -re / 3.0,
            abs: re.hypot(re / 3.0),
            method: "oracle".into(),
            err_est: 1e-12,
            wall_ms: 0.0,
            error: None,
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rows.csv");
        let rows = vec![row(100.0, 0.123_456_789_012_345_68), row(215.44346900318845, -1e-300), row(1e4, 0.0)];
        write_csv(&rows, &p).unwrap();
        assert_eq!(read_csv(&p).unwrap(), rows);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("lambda,re,im,abs,method,err_est,wall_ms\n"));
        write_csv(&[], &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "lambda,re,im,abs,method,err_est,wall_ms\n");
    }

    #[test]
    fn failure_rows_survive() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rows.csv");
        let mut r = row(10.0, f64::NAN);
        r.abs = f64::NAN;
        r.im = f64::NAN;
        r.err_est = f64::INFINITY;
        r.error = Some("failed".into());
        write_csv(&[r.clone()], &p).unwrap();
        let back = read_csv(&p).unwrap();
        assert!(back[0].abs.is_nan() && back[0].err_est.is_infinite() && !back[0].is_ok());
    }

    #[test]
    fn json_numbers_reload_exactly() {
        let mut s = Summary::default();
        let vals = [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-200, 6.02214076e23, -7.5];
        s.details = serde_json::json!({ "vals": vals, "n": 3, "name": "q\"x" });
        s.checks.insert("c1".into(), true);
        let text = to_json_string(&s).unwrap();
        let back: Value = serde_json::from_str(&text).unwrap();
        let got: Vec<f64> = back["details"]["vals"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert_eq!(got, vals);
        assert_eq!(back["details"]["n"], 3);
        assert_eq!(back["details"]["name"], "q\"x");
        assert_eq!(to_json_string(&s).unwrap(), text);
        assert!(text.contains("3.3333333333333331e-1"));
    }
}
