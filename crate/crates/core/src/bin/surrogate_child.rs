//! Reference child for the subprocess protocol: `surrogate-child pa|lna`.
//!
//! Reads one JSON request per line from stdin and answers with the built-in
//! surrogate's metrics, or an `error` field.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use robust_pareto::evaluators::surrogate::DESIGN_NAMES;
use robust_pareto::evaluators::{lna_metrics, pa_metrics, EvalError, MetricSet};
use serde_json::{json, Value};

type Model = fn(f64, f64, f64, f64, f64, f64) -> Result<MetricSet, EvalError>;

fn answer(model: Model, request: &Value) -> Result<MetricSet, String> {
    let design = request.get("design").and_then(Value::as_object).ok_or("missing `design` object")?;
    let mut x = [0.0; 5];
    for (slot, name) in x.iter_mut().zip(DESIGN_NAMES) {
        *slot = design.get(name).and_then(Value::as_f64).ok_or(format!("missing design value `{name}`"))?;
    }
    let operating = request.get("operating").and_then(Value::as_object).ok_or("missing `operating` object")?;
    let op = match operating.values().collect::<Vec<_>>().as_slice() {
        [v] => v.as_f64().ok_or("operating value is not a number")?,
        _ => return Err("expected exactly one operating value".into()),
    };
    model(x[0], x[1], x[2], x[3], x[4], op).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let model: Model = match std::env::args().nth(1).as_deref() {
        Some("pa") => pa_metrics,
        Some("lna") => lna_metrics,
        _ => {
            eprintln!("usage: surrogate-child pa|lna");
            return ExitCode::from(1);
        }
    };
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Value>(&line) {
            Ok(req) => {
                let id = req.get("id").cloned().unwrap_or(Value::Null);
                match answer(model, &req) {
                    Ok(metrics) => json!({ "id": id, "metrics": metrics }),
                    Err(e) => json!({ "id": id, "error": e }),
                }
            }
            Err(e) => json!({ "id": Value::Null, "error": format!("bad request: {e}") }),
        };
        if writeln!(out, "{reply}").and_then(|_| out.flush()).is_err() {
            break;
        }
    }
    ExitCode::SUCCESS
}
