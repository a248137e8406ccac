//! Query-only access to a pre-trained predictor.
//!
//! Three backends are serializable through [`ModelSpec`]: an arithmetic
//! expression, a lookup table with nearest-neighbor fallback, and an external
//! process speaking a line protocol. [`FnModel`] wraps in-process closures.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{FspError, Result};
use crate::expr::Expression;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

pub trait BlackBox: Send + Sync {
    fn dim(&self) -> usize;

    fn predict(&self, x: &[f64]) -> Result<f64>;

    fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    fn describe(&self) -> String;
}

pub type SharedModel = Arc<dyn BlackBox>;

/// Batched query with domain checks on the inputs and finiteness checks on the replies.
pub fn blackbox_query(model: &dyn BlackBox, domain: &Domain, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
    for x in xs {
        domain.check(x)?;
    }
    let ys = model.predict_batch(xs)?;
    if ys.len() != xs.len() {
        return Err(FspError::Query {
            message: format!("{} returned {} values for {} queries", model.describe(), ys.len(), xs.len()),
            line: None,
        });
    }
    ensure_finite(&ys)?;
    Ok(ys)
}

pub(crate) fn ensure_finite(ys: &[f64]) -> Result<()> {
    match ys.iter().find(|y| !y.is_finite()) {
        Some(y) => Err(FspError::Query { message: format!("non-finite prediction {y}"), line: None }),
        None => Ok(()),
    }
}

/// Closure-backed model.
pub struct FnModel {
    dim: usize,
    name: String,
    f: ScalarFn,
}

impl FnModel {
    pub fn new(dim: usize, name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FnModel { dim, name: name.into(), f: Arc::new(f) }
    }

    pub fn from_shared(dim: usize, name: impl Into<String>, f: ScalarFn) -> Self {
        FnModel { dim, name: name.into(), f }
    }
}

impl BlackBox for FnModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x)?;
        Ok((self.f)(x))
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

pub(crate) fn check_dim(dim: usize, x: &[f64]) -> Result<()> {
    if x.len() != dim {
        return Err(FspError::DimensionMismatch { expected: dim, got: x.len() });
    }
    Ok(())
}

pub struct ExpressionModel {
    expr: Expression,
}

impl ExpressionModel {
    pub fn new(expr: Expression) -> Self {
        ExpressionModel { expr }
    }
}

impl BlackBox for ExpressionModel {
    fn dim(&self) -> usize {
        self.expr.dim()
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.expr.eval(x)
    }

    fn describe(&self) -> String {
        format!("expression {:?}", self.expr.source())
    }
}

/// Stored predictions; off-table queries return the value of the nearest
/// stored point (Euclidean), ties going to the lowest index.
pub struct TableModel {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl TableModel {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(FspError::EmptyData);
        }
        if points.len() != values.len() {
            return Err(FspError::InvalidParameter(format!(
                "table has {} points but {} values",
                points.len(),
                values.len()
            )));
        }
        let dim = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(FspError::DimensionMismatch { expected: dim, got: p.len() });
        }
        ensure_finite(&values)?;
        Ok(TableModel { points, values })
    }
}

impl BlackBox for TableModel {
    fn dim(&self) -> usize {
        self.points[0].len()
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let mut best = (f64::INFINITY, 0usize);
        for (i, p) in self.points.iter().enumerate() {
            let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best.0 {
                best = (d2, i);
            }
        }
        Ok(self.values[best.1])
    }

    fn describe(&self) -> String {
        format!("table of {} points", self.points.len())
    }
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Child process answering one decimal per covariate line.
///
/// Protocol: on startup we send `DIM <d>` and expect `OK`. A batch is one line
/// of `d` comma-separated decimals per query followed by a blank line; the
/// child answers one decimal per query line, in order. Access is serialized:
/// one batch in flight at a time.
pub struct ProcessModel {
    command: Vec<String>,
    dim: usize,
    timeout: Duration,
    io: Mutex<ProcessIo>,
}

impl std::fmt::Debug for ProcessModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProcessModel").field("command", &self.command).field("dim", &self.dim).finish()
    }
}

struct ProcessIo {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl ProcessModel {
    pub fn spawn(command: &[String], dim: usize, timeout: Duration) -> Result<Self> {
        let (program, args) = command.split_first().ok_or_else(|| FspError::Handshake {
            stage: "spawn".into(),
            message: "empty command line".into(),
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| FspError::Handshake { stage: "spawn".into(), message: format!("{program}: {e}") })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut io = ProcessIo { child, stdin, lines: rx };

        let handshake = |io: &mut ProcessIo| -> std::result::Result<(), String> {
            writeln!(io.stdin, "DIM {dim}").and_then(|_| io.stdin.flush()).map_err(|e| e.to_string())?;
            match io.lines.recv_timeout(timeout) {
                Ok(Ok(line)) if line.trim() == "OK" => Ok(()),
                Ok(Ok(line)) => Err(format!("expected \"OK\", got {line:?}")),
                Ok(Err(e)) => Err(e.to_string()),
                Err(RecvTimeoutError::Timeout) => Err(format!("no reply within {timeout:?}")),
                Err(RecvTimeoutError::Disconnected) => Err("process exited".into()),
            }
        };
        if let Err(message) = handshake(&mut io) {
            let _ = io.child.kill();
            let _ = io.child.wait();
            return Err(FspError::Handshake { stage: "handshake".into(), message });
        }
        Ok(ProcessModel { command: command.to_vec(), dim, timeout, io: Mutex::new(io) })
    }

    pub fn command(&self) -> &[String] {
        &self.command
    }

    /// Sends one batch and collects the replies.
    pub fn round_trip(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        for x in xs {
            check_dim(self.dim, x)?;
        }
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let mut io = self.io.lock().unwrap_or_else(|p| p.into_inner());
        let mut request = String::new();
        for x in xs {
            let cells: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            request.push_str(&cells.join(","));
            request.push('\n');
        }
        request.push('\n');
        io.stdin
            .write_all(request.as_bytes())
            .and_then(|_| io.stdin.flush())
            .map_err(|e| FspError::Query { message: format!("write to model process failed: {e}"), line: None })?;

        let mut out = Vec::with_capacity(xs.len());
        while out.len() < xs.len() {
            let line = match io.lines.recv_timeout(self.timeout) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(FspError::Query { message: e.to_string(), line: None }),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(FspError::Query {
                        message: format!("model process timed out after {:?}", self.timeout),
                        line: None,
                    })
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(FspError::Query {
                        message: format!("model process exited after {} of {} replies", out.len(), xs.len()),
                        line: None,
                    })
                }
            };
            let value = line.trim().parse::<f64>().map_err(|_| FspError::Query {
                message: "malformed reply".into(),
                line: Some(line.clone()),
            })?;
            if !value.is_finite() {
                return Err(FspError::Query { message: "non-finite reply".into(), line: Some(line) });
            }
            out.push(value);
        }
        Ok(out)
    }
}

impl Drop for ProcessModel {
    fn drop(&mut self) {
        let io = self.io.get_mut().unwrap_or_else(|p| p.into_inner());
        let _ = io.child.kill();
        let _ = io.child.wait();
    }
}

impl BlackBox for ProcessModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.round_trip(std::slice::from_ref(&x.to_vec()))?[0])
    }

    fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.round_trip(xs)
    }

    fn describe(&self) -> String {
        format!("process {:?}", self.command.join(" "))
    }
}

/// Serializable description of a black-box backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Expression {
        expr: String,
    },
    Table {
        points: Vec<Vec<f64>>,
        values: Vec<f64>,
    },
    Process {
        command: Vec<String>,
        #[serde(default)]
        timeout_ms: Option<u64>,
    },
}

impl ModelSpec {
    pub fn build(&self, covariates: &[String]) -> Result<SharedModel> {
        let dim = covariates.len();
        let model: SharedModel = match self {
            ModelSpec::Expression { expr } => Arc::new(ExpressionModel::new(Expression::parse(expr, covariates)?)),
            ModelSpec::Table { points, values } => {
                let table = TableModel::new(points.clone(), values.clone())?;
                if table.dim() != dim {
                    return Err(FspError::DimensionMismatch { expected: dim, got: table.dim() });
                }
                Arc::new(table)
            }
            ModelSpec::Process { command, timeout_ms } => {
                let timeout = timeout_ms.map(Duration::from_millis).unwrap_or(DEFAULT_TIMEOUT);
                Arc::new(ProcessModel::spawn(command, dim, timeout)?)
            }
        };
        Ok(model)
    }

    /// Caveat to record alongside serialized artifacts, if any.
    pub fn reproducibility_note(&self) -> Option<String> {
        match self {
            ModelSpec::Process { command, .. } => Some(format!(
                "predictions depend on the external program {:?}; reproducibility requires it to be unchanged and deterministic",
                command.join(" ")
            )),
            _ => None,
        }
    }
}
