//! CSV and JSON output. Numbers carry 9 significant digits.

use std::io::Write;
use std::path::Path;

use serde_json::Value;

use super::{OutputFormat, SweepResult};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "sweep_param,sweep_value,scheme,mean_sum_rate,stderr,trials,mean_outer_iters";
pub const TRACE_HEADER: &str = "sweep_param,sweep_value,scheme,iteration,mean_sum_rate,trials";

/// `x` with 9 significant digits; plain notation for exponents in [-5, 9).
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    if (-5..9).contains(&exp) {
        format!("{:.*}", (8 - exp) as usize, x)
    } else {
        sci
    }
}

pub fn round9(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.8e}").parse().expect("round trip")
    } else {
        x
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sig9).unwrap_or_default()
}

pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.sweep_param,
            sig9(r.sweep_value),
            r.scheme,
            opt(r.mean_sum_rate),
            opt(r.stderr),
            r.trials,
            opt(r.mean_outer_iters),
        ));
    }
    out
}

/// One row per outer iteration of each mean trace, starting at iteration 0.
pub fn to_trace_csv(result: &SweepResult) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &result.rows {
        for (i, v) in r.mean_trace.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.sweep_param,
                sig9(r.sweep_value),
                r.scheme,
                i,
                sig9(*v),
                r.trials
            ));
        }
    }
    out
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round9(n.as_f64().expect("f64 number"));
            if let Some(r) = serde_json::Number::from_f64(x) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

pub fn to_json(result: &SweepResult) -> Result<String> {
    let mut v = serde_json::to_value(result)?;
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<SweepResult> {
    Ok(serde_json::from_str(text)?)
}

pub fn render(result: &SweepResult, format: OutputFormat, trace: bool) -> Result<String> {
    match format {
        OutputFormat::Json => to_json(result),
        OutputFormat::Csv if trace => Ok(to_trace_csv(result)),
        OutputFormat::Csv => Ok(to_csv(result)),
    }
}

/// Writes to `path`, or stdout when `None`.
pub fn write_output(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}
