//! Black-box objectives: synthetic test functions, shipped search-space
//! catalogs, and an external worker process speaking a line protocol.
//!
//! Every objective is maximized. Functions that are naturally minimized
//! (sphere, Branin, Rosenbrock) are negated here.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{parse_space, Configuration, ParamSpec, SearchSpace, Transform, Value};

pub const MLP_TABLE4: &str = include_str!("../catalogs/mlp_table4.json");
pub const CASH_TABLE1: &str = include_str!("../catalogs/cash_table1.json");

pub const CATALOG_NAMES: [&str; 2] = ["mlp_table4", "cash_table1"];
pub const SYNTHETIC_NAMES: [&str; 4] = ["sphere5", "branin2", "rosenbrock4", "cash_synthetic"];

/// Global minimum of the Branin function on its standard box.
pub const BRANIN_MIN: f64 = 0.397_887_357_729_738_16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error("unknown objective `{0}`")]
    UnknownObjective(String),
    #[error("unknown catalog `{0}`")]
    UnknownCatalog(String),
    #[error("invalid evaluator endpoint: {0}")]
    InvalidEndpoint(String),
}

/// Reason an evaluation produced no score.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("configuration rejected: {0}")]
    InvalidConfig(String),
    #[error("could not launch worker: {0}")]
    Launch(String),
    #[error("worker timed out after {0:?}")]
    Timeout(Duration),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("worker reported failure: {0}")]
    Worker(String),
    #[error("worker restart limit ({0}) reached")]
    RestartLimit(u32),
}

/// A score-producing black box over a search space. Larger is better.
pub trait Objective: Send {
    fn name(&self) -> &str;

    fn space(&self) -> &SearchSpace;

    fn evaluate(&mut self, trial_id: u64, config: &Configuration) -> Result<f64, EvalError>;

    /// Repeated evaluation of one configuration yields identical values.
    fn is_deterministic(&self) -> bool;

    /// Known maximum, when there is one.
    fn optimum(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyntheticKind {
    Sphere5,
    Branin2,
    Rosenbrock4,
    CashSynthetic,
}

impl SyntheticKind {
    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::Sphere5 => "sphere5",
            SyntheticKind::Branin2 => "branin2",
            SyntheticKind::Rosenbrock4 => "rosenbrock4",
            SyntheticKind::CashSynthetic => "cash_synthetic",
        }
    }
}

impl FromStr for SyntheticKind {
    type Err = ObjectiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sphere5" => Ok(SyntheticKind::Sphere5),
            "branin2" => Ok(SyntheticKind::Branin2),
            "rosenbrock4" => Ok(SyntheticKind::Rosenbrock4),
            "cash_synthetic" => Ok(SyntheticKind::CashSynthetic),
            other => Err(ObjectiveError::UnknownObjective(other.to_string())),
        }
    }
}

/// Branch labels of `cash_synthetic` and the best value attainable in each.
pub const CASH_SYNTHETIC_BRANCHES: [(&str, f64); 3] =
    [("branch_1", 0.0), ("branch_2", -0.2), ("branch_3", -0.5)];

#[derive(Debug, Clone)]
pub struct SyntheticObjective {
    kind: SyntheticKind,
    space: SearchSpace,
}

fn unit_box(name: &str, prefix: &str, d: usize) -> SearchSpace {
    SearchSpace::new(
        name,
        (0..d)
            .map(|i| ParamSpec::real(&format!("{prefix}{i}"), 0.0, 1.0, Transform::Linear))
            .collect(),
    )
    .expect("unit boxes are valid")
}

pub fn synthetic(name: &str) -> Result<SyntheticObjective, ObjectiveError> {
    Ok(SyntheticObjective::new(name.parse()?))
}

impl SyntheticObjective {
    pub fn new(kind: SyntheticKind) -> Self {
        let space = match kind {
            SyntheticKind::Sphere5 => unit_box("sphere5", "x", 5),
            SyntheticKind::Branin2 => unit_box("branin2", "u", 2),
            SyntheticKind::Rosenbrock4 => unit_box("rosenbrock4", "u", 4),
            SyntheticKind::CashSynthetic => {
                let labels: Vec<&str> = CASH_SYNTHETIC_BRANCHES.iter().map(|b| b.0).collect();
                let mut params = vec![ParamSpec::categorical("branch", &labels)];
                for label in &labels {
                    for axis in ["x", "y"] {
                        params.push(
                            ParamSpec::real(&format!("{label}_{axis}"), 0.0, 1.0, Transform::Linear)
                                .when("branch", label),
                        );
                    }
                }
                SearchSpace::new("cash_synthetic", params).expect("cash_synthetic space is valid")
            }
        };
        SyntheticObjective { kind, space }
    }

    pub fn kind(&self) -> SyntheticKind {
        self.kind
    }

    /// Pure evaluation of the function.
    pub fn value(&self, config: &Configuration) -> Result<f64, EvalError> {
        self.space
            .validate(config)
            .map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
        let real = |name: &str| -> f64 {
            config
                .get(name)
                .and_then(Value::as_f64)
                .expect("validated configuration")
        };
        let v = match self.kind {
            SyntheticKind::Sphere5 => -(0..5).map(|i| (real(&format!("x{i}")) - 0.3).powi(2)).sum::<f64>(),
            SyntheticKind::Branin2 => {
                let x1 = -5.0 + 15.0 * real("u0");
                let x2 = 15.0 * real("u1");
                -branin(x1, x2)
            }
            SyntheticKind::Rosenbrock4 => {
                let x: Vec<f64> = (0..4).map(|i| -2.0 + 4.0 * real(&format!("u{i}"))).collect();
                -x.windows(2)
                    .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                    .sum::<f64>()
            }
            SyntheticKind::CashSynthetic => {
                let branch = config.get("branch").and_then(Value::as_str).expect("validated");
                let offset = CASH_SYNTHETIC_BRANCHES
                    .iter()
                    .find(|b| b.0 == branch)
                    .map(|b| b.1)
                    .expect("validated branch label");
                let dx = real(&format!("{branch}_x")) - 0.5;
                let dy = real(&format!("{branch}_y")) - 0.5;
                offset - dx * dx - dy * dy
            }
        };
        Ok(v)
    }
}

/// Branin-Hoo function on `[-5, 10] x [0, 15]`.
pub fn branin(x1: f64, x2: f64) -> f64 {
    use std::f64::consts::PI;
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

impl Objective for SyntheticObjective {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&mut self, _trial_id: u64, config: &Configuration) -> Result<f64, EvalError> {
        self.value(config)
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn optimum(&self) -> Option<f64> {
        Some(match self.kind {
            SyntheticKind::Branin2 => -BRANIN_MIN,
            _ => 0.0,
        })
    }
}

/// Parses one of the shipped search spaces.
pub fn catalog(name: &str) -> Result<SearchSpace, ObjectiveError> {
    let doc = match name {
        "mlp_table4" => MLP_TABLE4,
        "cash_table1" => CASH_TABLE1,
        other => return Err(ObjectiveError::UnknownCatalog(other.to_string())),
    };
    Ok(parse_space(doc).expect("shipped catalogs are valid"))
}

/// How to launch and supervise an evaluator process.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatorEndpoint {
    pub command: Vec<String>,
    pub timeout: Duration,
    pub max_restarts: u32,
}

impl EvaluatorEndpoint {
    pub fn new(command: Vec<String>, timeout: Duration, max_restarts: u32) -> Result<Self, ObjectiveError> {
        if command.is_empty() {
            return Err(ObjectiveError::InvalidEndpoint("empty command".into()));
        }
        if timeout.is_zero() {
            return Err(ObjectiveError::InvalidEndpoint("timeout must be positive".into()));
        }
        Ok(EvaluatorEndpoint {
            command,
            timeout,
            max_restarts,
        })
    }

    /// Splits a shell-style command line into argv.
    pub fn from_command_line(line: &str, timeout: Duration, max_restarts: u32) -> Result<Self, ObjectiveError> {
        let argv = shell_words::split(line).map_err(|e| ObjectiveError::InvalidEndpoint(e.to_string()))?;
        Self::new(argv, timeout, max_restarts)
    }
}

/// One line sent to the worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub trial_id: u64,
    pub params: Configuration,
}

/// One line expected back from the worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResponse {
    pub trial_id: u64,
    pub status: ResponseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseStatus {
    Ok,
    Failed,
}

struct Worker {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
}

impl Worker {
    fn launch(command: &[String]) -> Result<Self, EvalError> {
        let mut child = Command::new(&command[0])
            .args(&command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EvalError::Launch(format!("`{}`: {e}", command[0])))?;
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
        Ok(Worker {
            child,
            stdin,
            lines: rx,
        })
    }

    fn shutdown(mut self, grace: Duration) {
        drop(self.stdin.take());
        let deadline = Instant::now() + grace;
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Supervises one worker process; requests are strictly sequential.
pub struct ExternalEvaluator {
    endpoint: EvaluatorEndpoint,
    worker: Option<Worker>,
    launches: u32,
    restarts: u32,
}

impl ExternalEvaluator {
    pub fn new(endpoint: EvaluatorEndpoint) -> Self {
        ExternalEvaluator {
            endpoint,
            worker: None,
            launches: 0,
            restarts: 0,
        }
    }

    pub fn endpoint(&self) -> &EvaluatorEndpoint {
        &self.endpoint
    }

    /// Number of relaunches after a worker was discarded.
    pub fn restarts(&self) -> u32 {
        self.restarts
    }

    fn worker(&mut self) -> Result<&mut Worker, EvalError> {
        if self.worker.is_none() {
            if self.launches > 0 {
                if self.restarts >= self.endpoint.max_restarts {
                    return Err(EvalError::RestartLimit(self.endpoint.max_restarts));
                }
                self.restarts += 1;
            }
            self.launches += 1;
            self.worker = Some(Worker::launch(&self.endpoint.command)?);
        }
        Ok(self.worker.as_mut().expect("just launched"))
    }

    fn discard(&mut self) {
        if let Some(w) = self.worker.take() {
            w.kill();
        }
    }

    /// Sends one request and waits for its response.
    pub fn evaluate(&mut self, trial_id: u64, config: &Configuration) -> Result<f64, EvalError> {
        let timeout = self.endpoint.timeout;
        let mut line = serde_json::to_string(&EvalRequest {
            trial_id,
            params: config.clone(),
        })
        .map_err(|e| EvalError::Protocol(e.to_string()))?;
        line.push('\n');

        let worker = self.worker()?;
        let sent = worker
            .stdin
            .as_mut()
            .map(|s| s.write_all(line.as_bytes()).and_then(|_| s.flush()));
        if !matches!(sent, Some(Ok(()))) {
            self.discard();
            return Err(EvalError::Protocol("worker closed its input".into()));
        }

        let reply = match worker.lines.recv_timeout(timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => {
                self.discard();
                return Err(EvalError::Protocol(format!("reading worker output: {e}")));
            }
            Err(RecvTimeoutError::Timeout) => {
                self.discard();
                return Err(EvalError::Timeout(timeout));
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.discard();
                return Err(EvalError::Protocol("worker exited without responding".into()));
            }
        };

        match parse_response(&reply, trial_id) {
            Ok(value) => Ok(value),
            Err(e @ EvalError::Worker(_)) => Err(e),
            Err(e) => {
                self.discard();
                Err(e)
            }
        }
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        if let Some(w) = self.worker.take() {
            w.shutdown(Duration::from_millis(500));
        }
    }
}

fn parse_response(line: &str, trial_id: u64) -> Result<f64, EvalError> {
    let resp: EvalResponse = serde_json::from_str(line.trim())
        .map_err(|e| EvalError::Protocol(format!("malformed response `{}`: {e}", line.trim())))?;
    if resp.trial_id != trial_id {
        return Err(EvalError::Protocol(format!(
            "response for trial {} while waiting for {trial_id}",
            resp.trial_id
        )));
    }
    match (resp.status, resp.value) {
        (ResponseStatus::Ok, Some(v)) if v.is_finite() => Ok(v),
        (ResponseStatus::Ok, _) => Err(EvalError::Protocol(
            "status ok without a finite value".into(),
        )),
        (ResponseStatus::Failed, _) => Err(EvalError::Worker(
            resp.reason.unwrap_or_else(|| "no reason given".into()),
        )),
    }
}

/// Objective backed by an external worker process.
pub struct ExternalObjective {
    name: String,
    space: SearchSpace,
    evaluator: ExternalEvaluator,
    deterministic: bool,
}

impl ExternalObjective {
    pub fn new(name: impl Into<String>, space: SearchSpace, endpoint: EvaluatorEndpoint) -> Self {
        ExternalObjective {
            name: name.into(),
            space,
            evaluator: ExternalEvaluator::new(endpoint),
            deterministic: false,
        }
    }

    /// Declares that the worker computes a pure function of its inputs.
    pub fn deterministic(mut self, yes: bool) -> Self {
        self.deterministic = yes;
        self
    }

    pub fn evaluator(&self) -> &ExternalEvaluator {
        &self.evaluator
    }
}

impl Objective for ExternalObjective {
    fn name(&self) -> &str {
        &self.name
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&mut self, trial_id: u64, config: &Configuration) -> Result<f64, EvalError> {
        self.evaluator.evaluate(trial_id, config)
    }

    fn is_deterministic(&self) -> bool {
        self.deterministic
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Domain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reals(pairs: &[(&str, f64)]) -> Configuration {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), Value::Real(*v)))
            .collect()
    }

    #[test]
    fn sphere_optimum() {
        let f = synthetic("sphere5").unwrap();
        let c = reals(&[("x0", 0.3), ("x1", 0.3), ("x2", 0.3), ("x3", 0.3), ("x4", 0.3)]);
        assert_eq!(f.value(&c).unwrap(), 0.0);
    }

    #[test]
    fn branin_known_minimizers() {
        use std::f64::consts::PI;
        for (x1, x2) in [(-PI, 12.275), (PI, 2.275), (9.42478, 2.475)] {
            assert!((branin(x1, x2) - BRANIN_MIN).abs() < 1e-5);
        }
        let f = synthetic("branin2").unwrap();
        let c = reals(&[("u0", (PI + 5.0) / 15.0), ("u1", 2.275 / 15.0)]);
        assert!((f.value(&c).unwrap() + BRANIN_MIN).abs() < 1e-9);
    }

    #[test]
    fn rosenbrock_optimum_at_ones() {
        let f = synthetic("rosenbrock4").unwrap();
        let c = reals(&[("u0", 0.75), ("u1", 0.75), ("u2", 0.75), ("u3", 0.75)]);
        assert_eq!(f.value(&c).unwrap(), 0.0);
    }

    #[test]
    fn cash_synthetic_branch_centers() {
        let f = synthetic("cash_synthetic").unwrap();
        for (label, best) in CASH_SYNTHETIC_BRANCHES {
            let mut c = reals(&[(&format!("{label}_x"), 0.5), (&format!("{label}_y"), 0.5)]);
            c.insert("branch", Value::Cat(label.into()));
            assert_eq!(f.value(&c).unwrap(), best);
        }
        let mut bad = reals(&[("branch_2_x", 0.5)]);
        bad.insert("branch", Value::Cat("branch_1".into()));
        assert!(matches!(f.value(&bad), Err(EvalError::InvalidConfig(_))));
    }

    #[test]
    fn unknown_names() {
        assert!(matches!(synthetic("ackley"), Err(ObjectiveError::UnknownObjective(_))));
        assert!(matches!(catalog("svm"), Err(ObjectiveError::UnknownCatalog(_))));
    }

    #[test]
    fn optima_bound_random_samples() {
        for name in SYNTHETIC_NAMES {
            let mut f = synthetic(name).unwrap();
            let opt = f.optimum().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            for id in 0..100_000 {
                let c = f.space().sample(&mut rng);
                let v = f.evaluate(id, &c).unwrap();
                assert!(v <= opt + 1e-9, "{name}: {v} > {opt}");
                if id % 1000 == 0 {
                    assert_eq!(v.to_bits(), f.evaluate(id, &c).unwrap().to_bits());
                }
            }
        }
    }

    #[test]
    fn mlp_catalog_alpha() {
        let space = catalog("mlp_table4").unwrap();
        assert_eq!(space.dim(), 9);
        assert_eq!(
            space.param("alpha").unwrap().domain,
            Domain::Real {
                low: 1e-5,
                high: 10.0,
                transform: Transform::Log
            }
        );
    }

    #[test]
    fn endpoint_validation() {
        assert!(EvaluatorEndpoint::new(vec![], Duration::from_secs(1), 0).is_err());
        assert!(EvaluatorEndpoint::new(vec!["x".into()], Duration::ZERO, 0).is_err());
        let e = EvaluatorEndpoint::from_command_line("worker --value '0.5 x'", Duration::from_secs(1), 2).unwrap();
        assert_eq!(e.command, vec!["worker", "--value", "0.5 x"]);
    }

    #[test]
    fn response_parsing() {
        assert_eq!(parse_response(r#"{"trial_id": 3, "status": "ok", "value": 0.5}"#, 3), Ok(0.5));
        assert!(matches!(
            parse_response(r#"{"trial_id": 4, "status": "ok", "value": 0.5}"#, 3),
            Err(EvalError::Protocol(_))
        ));
        assert!(matches!(
            parse_response(r#"{"trial_id": 3, "status": "ok", "value": "high"}"#, 3),
            Err(EvalError::Protocol(_))
        ));
        assert!(matches!(
            parse_response(r#"{"trial_id": 3, "status": "ok"}"#, 3),
            Err(EvalError::Protocol(_))
        ));
        assert_eq!(
            parse_response(r#"{"trial_id": 3, "status": "failed", "reason": "diverged"}"#, 3),
            Err(EvalError::Worker("diverged".into()))
        );
        assert!(matches!(parse_response("nonsense", 3), Err(EvalError::Protocol(_))));
    }

    #[test]
    fn request_wire_format() {
        let mut params = Configuration::new();
        params.insert("lr", Value::Real(0.01));
        params.insert("layers", Value::Int(3));
        params.insert("act", Value::Cat("relu".into()));
        let line = serde_json::to_string(&EvalRequest { trial_id: 7, params }).unwrap();
        assert_eq!(line, r#"{"trial_id":7,"params":{"act":"relu","layers":3,"lr":0.01}}"#);
    }
}
