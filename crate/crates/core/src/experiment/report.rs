use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Error, Result};
use crate::inference::CoverageRow;
use crate::numerics::DenseMatrix;

use super::config::ExperimentConfig;

/// `(k, ||x_k - x*||^2, dist(x_k, M)^2)`.
pub type TraceRow = (u64, f64, f64);

/// `(n, rep, ||Sigma_hat - Sigma||_2)`.
pub type RateRow = (u64, u64, f64);

/// Everything a command produces, ready to be written.
#[derive(Clone, Debug, Default)]
pub struct Reports {
    pub summary: Value,
    pub trace: Option<Vec<TraceRow>>,
    pub sigma_hat: Option<DenseMatrix>,
    pub sigma_mc: Option<DenseMatrix>,
    pub rate_rows: Option<Vec<RateRow>>,
    pub coverage_rows: Option<Vec<CoverageRow>>,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Pretty JSON with sorted keys and every float at 17 significant digits.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, value: &Value, depth: usize) {
    let pad = |out: &mut String, depth: usize| out.extend(std::iter::repeat("  ").take(depth));
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else {
                out.push_str(&fmt_f64(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.iter().all(|v| !v.is_array() && !v.is_object()) {
                out.push('[');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, v, depth + 1);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, v) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, v, depth + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*k], depth + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("k,dist_to_star_sq,shadow_sq_dist\n");
    for &(k, d, sh) in rows {
        writeln!(s, "{k},{},{}", fmt_f64(d), fmt_f64(sh)).unwrap();
    }
    s
}

/// Row-major matrix, one matrix row per line.
pub fn matrix_csv(m: &DenseMatrix) -> String {
    let mut s = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| fmt_f64(v)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn rate_csv(rows: &[RateRow]) -> String {
    let mut s = String::from("n,rep,opnorm_error\n");
    for &(n, rep, e) in rows {
        writeln!(s, "{n},{rep},{}", fmt_f64(e)).unwrap();
    }
    s
}

pub fn coverage_csv(rows: &[CoverageRow]) -> String {
    let mut s = String::from("n,rep,error,ci_lo,ci_hi,covered\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.n,
            r.rep,
            fmt_f64(r.error),
            fmt_f64(r.ci_lo),
            fmt_f64(r.ci_hi),
            u8::from(r.covered)
        )
        .unwrap();
    }
    s
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes the reports into `config.out_dir`, returning the paths written.
pub fn emit_reports(reports: &Reports, config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    emit_reports_to(reports, &config.out_dir)
}

pub fn emit_reports_to(reports: &Reports, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    if let Some(trace) = &reports.trace {
        written.push(write_file(dir.join("trace.csv"), &trace_csv(trace))?);
    }
    if let Some(m) = &reports.sigma_hat {
        written.push(write_file(dir.join("sigma_hat.csv"), &matrix_csv(m))?);
    }
    if let Some(m) = &reports.sigma_mc {
        written.push(write_file(dir.join("sigma_mc.csv"), &matrix_csv(m))?);
    }
    if let Some(rows) = &reports.rate_rows {
        written.push(write_file(dir.join("rate.csv"), &rate_csv(rows))?);
    }
    if let Some(rows) = &reports.coverage_rows {
        written.push(write_file(dir.join("coverage.csv"), &coverage_csv(rows))?);
    }
    written.push(write_file(dir.join("summary.json"), &canonical_json(&reports.summary))?);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn canonical_json_sorts_keys_and_parses_back() {
        let v = json!({"b": 1, "a": [0.5, 2], "c": {"z": null, "y": "q\"x"}, "d": [[1.0, 2.0], [3.0, 4.0]]});
        let s = canonical_json(&v);
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.contains("5.0000000000000000e-1"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["c"]["y"], "q\"x");
        assert_eq!(back["a"][0].as_f64().unwrap(), 0.5);
        assert_eq!(back["d"][1][0].as_f64().unwrap(), 3.0);
    }

    #[test]
    fn coverage_rows_render() {
        let rows = vec![CoverageRow {
            n: 10,
            rep: 0,
            error: 0.25,
            ci_lo: -1.0,
            ci_hi: 1.0,
            covered: true,
        }];
        let s = coverage_csv(&rows);
        assert_eq!(
            s,
            "n,rep,error,ci_lo,ci_hi,covered\n10,0,2.5000000000000000e-1,-1.0000000000000000e0,1.0000000000000000e0,1\n"
        );
    }
}
