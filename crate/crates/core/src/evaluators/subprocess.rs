//! Newline-delimited JSON protocol for external simulators.
//!
//! Request: `{"id": 3, "design": {"V_DS": 16.0, ...}, "operating": {"V_GS": -1.5}}`
//!
//! Response: `{"id": 3, "metrics": {"Pout_avg": 21.2, ...}}` or `{"id": 3, "error": "..."}`
//!
//! One response per request, in order, ids echoed. Children are started with
//! `sh -c <command>` and kept alive across requests unless fresh-child mode is on.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde_json::{Map, Value};

use crate::design_space::{DesignPoint, DesignSpace};

use super::{EvalError, Evaluator, MetricSet};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

/// One live child process and the line stream from its stdout.
struct Channel {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
}

impl Channel {
    fn spawn(command: &str) -> Result<Self, EvalError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self { child, stdin, lines: rx })
    }

    fn exit_status(&mut self) -> String {
        match self.child.try_wait() {
            Ok(Some(status)) => status.to_string(),
            Ok(None) => "stdout closed".to_string(),
            Err(e) => e.to_string(),
        }
    }

    fn round_trip(&mut self, request: &str, timeout: Duration) -> Result<String, EvalError> {
        let stdin = self.stdin.as_mut().ok_or_else(|| EvalError::ChildExited("stdin closed".into()))?;
        let written =
            stdin.write_all(request.as_bytes()).and_then(|_| stdin.write_all(b"\n")).and_then(|_| stdin.flush());
        if let Err(e) = written {
            // give the child a moment to be reaped so the exit status is reported
            thread::sleep(Duration::from_millis(10));
            return Err(EvalError::ChildExited(format!("{} ({e})", self.exit_status())));
        }
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(EvalError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Err(EvalError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                let _ = self.child.wait();
                Err(EvalError::ChildExited(self.exit_status()))
            }
        }
    }
}

impl Drop for Channel {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct SubprocessEvaluator {
    command: String,
    design_names: Vec<String>,
    operating_name: String,
    metric_names: Vec<String>,
    timeout: Duration,
    fresh_child: bool,
    idle: Mutex<Vec<Channel>>,
    next_id: AtomicU64,
}

impl std::fmt::Debug for SubprocessEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubprocessEvaluator")
            .field("command", &self.command)
            .field("metric_names", &self.metric_names)
            .field("timeout", &self.timeout)
            .field("fresh_child", &self.fresh_child)
            .finish()
    }
}

impl SubprocessEvaluator {
    /// `metric_names` are required in every response.
    pub fn new(command: impl Into<String>, space: &DesignSpace, metric_names: Vec<String>) -> Self {
        Self {
            command: command.into(),
            design_names: space.parameters().iter().map(|p| p.name().to_string()).collect(),
            operating_name: space.operating().name().to_string(),
            metric_names,
            timeout: DEFAULT_TIMEOUT,
            fresh_child: false,
            idle: Mutex::new(Vec::new()),
            next_id: AtomicU64::new(0),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Start a new child for every request and stop it afterwards.
    pub fn with_fresh_child(mut self, fresh: bool) -> Self {
        self.fresh_child = fresh;
        self
    }

    fn request_line(&self, id: u64, design: &DesignPoint, operating: f64) -> Result<String, EvalError> {
        if design.values.len() != self.design_names.len() {
            return Err(EvalError::OutOfRange(format!(
                "design has {} values, expected {}",
                design.values.len(),
                self.design_names.len()
            )));
        }
        let mut d = Map::new();
        for (name, &v) in self.design_names.iter().zip(&design.values) {
            d.insert(name.clone(), Value::from(v));
        }
        let mut op = Map::new();
        op.insert(self.operating_name.clone(), Value::from(operating));
        let mut req = Map::new();
        req.insert("id".into(), Value::from(id));
        req.insert("design".into(), Value::Object(d));
        req.insert("operating".into(), Value::Object(op));
        Ok(Value::Object(req).to_string())
    }

    fn parse_response(&self, id: u64, line: &str) -> Result<MetricSet, EvalError> {
        let value: Value = serde_json::from_str(line).map_err(|e| EvalError::Malformed(format!("{e}: {line}")))?;
        let obj = value.as_object().ok_or_else(|| EvalError::Malformed(format!("not an object: {line}")))?;
        let got = obj
            .get("id")
            .and_then(Value::as_i64)
            .ok_or_else(|| EvalError::Malformed(format!("missing integer `id`: {line}")))?;
        if got < 0 || got as u64 != id {
            return Err(EvalError::IdMismatch { expected: id, got });
        }
        if let Some(err) = obj.get("error") {
            let msg = err.as_str().map(str::to_string).unwrap_or_else(|| err.to_string());
            return Err(EvalError::Child(msg));
        }
        let metrics = obj
            .get("metrics")
            .and_then(Value::as_object)
            .ok_or_else(|| EvalError::Malformed(format!("missing `metrics` object: {line}")))?;
        let mut out = MetricSet::new();
        for (k, v) in metrics {
            let x = v.as_f64().ok_or_else(|| EvalError::Malformed(format!("metric `{k}` is not a number")))?;
            out.insert(k.clone(), x);
        }
        if let Some(missing) = self.metric_names.iter().find(|m| !out.contains_key(*m)) {
            return Err(EvalError::MissingMetric(missing.clone()));
        }
        Ok(out)
    }

    fn checkout(&self) -> Result<Channel, EvalError> {
        let pooled = if self.fresh_child { None } else { self.idle.lock().unwrap().pop() };
        match pooled {
            Some(c) => Ok(c),
            None => Channel::spawn(&self.command),
        }
    }
}

impl Evaluator for SubprocessEvaluator {
    fn evaluate(&self, design: &DesignPoint, operating: f64) -> Result<MetricSet, EvalError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let line = self.request_line(id, design, operating)?;
        let mut channel = self.checkout()?;
        // a failed exchange leaves the channel in an unknown state, so it is dropped (and killed)
        let response = channel.round_trip(&line, self.timeout)?;
        let parsed = self.parse_response(id, &response);
        let protocol_ok = !matches!(parsed, Err(EvalError::Malformed(_)) | Err(EvalError::IdMismatch { .. }));
        if protocol_ok && !self.fresh_child {
            self.idle.lock().unwrap().push(channel);
        }
        parsed
    }

    fn metric_names(&self) -> Vec<String> {
        self.metric_names.clone()
    }
}
