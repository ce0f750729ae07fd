//! Benchmark grids over (objective, strategy, seed), best-so-far traces and
//! CSV exports.
//!
//! Every cell is written to `<output>/cells/` as soon as it finishes, so an
//! interrupted run resumes by skipping the cells already on disk. The
//! assembled report lands in `<output>/report.json`.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::objectives::{self, EvaluatorEndpoint, ExternalObjective, Objective, ObjectiveError};
use crate::space::{parse_space, SearchSpace, SpaceError};
use crate::strategies::{self, StrategyConfig, StrategyError, StrategyKind, TrialHistory};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("space `{path}`: {source}")]
    Space { path: String, source: SpaceError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("csv export: {0}")]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A shipped catalog name or a path to a space document.
pub fn resolve_space(spec: &str) -> Result<SearchSpace, BenchError> {
    if objectives::CATALOG_NAMES.contains(&spec) {
        return Ok(objectives::catalog(spec)?);
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_space(&text).map_err(|source| BenchError::Space {
        path: spec.to_string(),
        source,
    })
}

/// Either a synthetic objective name or an external evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObjectiveSpec {
    Synthetic(String),
    External(ExternalSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    pub name: String,
    /// Catalog name or space document path.
    pub space: String,
    /// Worker command line.
    pub worker: String,
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default = "default_restarts")]
    pub max_restarts: u32,
    #[serde(default = "default_true")]
    pub deterministic: bool,
}

fn default_timeout() -> f64 {
    30.0
}

fn default_restarts() -> u32 {
    3
}

fn default_true() -> bool {
    true
}

impl ObjectiveSpec {
    pub fn name(&self) -> &str {
        match self {
            ObjectiveSpec::Synthetic(name) => name,
            ObjectiveSpec::External(e) => &e.name,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Objective>, BenchError> {
        match self {
            ObjectiveSpec::Synthetic(name) => Ok(Box::new(objectives::synthetic(name)?)),
            ObjectiveSpec::External(e) => {
                if !(e.timeout.is_finite() && e.timeout > 0.0) {
                    return Err(BenchError::InvalidPlan(format!(
                        "objective `{}`: timeout must be positive",
                        e.name
                    )));
                }
                let endpoint = EvaluatorEndpoint::from_command_line(
                    &e.worker,
                    Duration::from_secs_f64(e.timeout),
                    e.max_restarts,
                )?;
                let space = resolve_space(&e.space)?;
                Ok(Box::new(
                    ExternalObjective::new(e.name.clone(), space, endpoint).deterministic(e.deterministic),
                ))
            }
        }
    }
}

/// A strategy configuration with the label it reports under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub struct StrategyEntry {
    pub label: String,
    pub config: StrategyConfig,
}

impl StrategyEntry {
    pub fn new(config: StrategyConfig) -> Self {
        StrategyEntry {
            label: config.kind.name().to_string(),
            config,
        }
    }

    pub fn labeled(label: impl Into<String>, config: StrategyConfig) -> Self {
        StrategyEntry {
            label: label.into(),
            config,
        }
    }
}

impl TryFrom<serde_json::Value> for StrategyEntry {
    type Error = String;

    fn try_from(value: serde_json::Value) -> Result<Self, Self::Error> {
        match value {
            serde_json::Value::String(kind) => {
                let kind: StrategyKind = kind.parse().map_err(|e: StrategyError| e.to_string())?;
                Ok(StrategyEntry::new(StrategyConfig::new(kind)))
            }
            serde_json::Value::Object(mut map) => {
                let label = match map.remove("label") {
                    Some(serde_json::Value::String(s)) => Some(s),
                    Some(other) => return Err(format!("label must be a string, got {other}")),
                    None => None,
                };
                let config: StrategyConfig =
                    serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| e.to_string())?;
                Ok(match label {
                    Some(l) => StrategyEntry::labeled(l, config),
                    None => StrategyEntry::new(config),
                })
            }
            other => Err(format!("expected a strategy name or object, got {other}")),
        }
    }
}

impl From<StrategyEntry> for serde_json::Value {
    fn from(entry: StrategyEntry) -> Self {
        let mut value = serde_json::to_value(entry.config).expect("config serializes");
        if let serde_json::Value::Object(map) = &mut value {
            map.insert("label".into(), serde_json::Value::String(entry.label));
        }
        value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkPlan {
    pub objectives: Vec<ObjectiveSpec>,
    pub strategies: Vec<StrategyEntry>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_budget() -> usize {
    50
}

fn default_parallelism() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("bench-out")
}

impl BenchmarkPlan {
    pub fn new(
        objectives: Vec<ObjectiveSpec>,
        strategies: Vec<StrategyEntry>,
        seeds: Vec<u64>,
        output: impl Into<PathBuf>,
    ) -> Self {
        BenchmarkPlan {
            objectives,
            strategies,
            budget: default_budget(),
            seeds,
            base_seed: 0,
            parallelism: default_parallelism(),
            output: output.into(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::InvalidPlan(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidPlan(m.to_string()));
        if self.objectives.is_empty() {
            return bad("no objectives");
        }
        if self.strategies.is_empty() {
            return bad("no strategies");
        }
        if self.seeds.is_empty() {
            return bad("no seeds");
        }
        if self.budget < 1 {
            return bad("budget must be >= 1");
        }
        if self.parallelism < 1 {
            return bad("parallelism must be >= 1");
        }
        let mut names = BTreeSet::new();
        for o in &self.objectives {
            if !names.insert(o.name()) {
                return Err(BenchError::InvalidPlan(format!("duplicate objective `{}`", o.name())));
            }
        }
        let mut labels = BTreeSet::new();
        for s in &self.strategies {
            if !labels.insert(s.label.as_str()) {
                return Err(BenchError::InvalidPlan(format!("duplicate strategy label `{}`", s.label)));
            }
            s.config.validate()?;
        }
        let mut seeds = BTreeSet::new();
        for s in &self.seeds {
            if !seeds.insert(s) {
                return Err(BenchError::InvalidPlan(format!("duplicate seed {s}")));
            }
        }
        Ok(())
    }
}

/// Seed of one cell, independent across objectives, strategies and seeds.
pub fn cell_seed(base_seed: u64, objective: &str, strategy: &str, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(base_seed.to_le_bytes());
    h.update(objective.as_bytes());
    h.update([0]);
    h.update(strategy.as_bytes());
    h.update([0]);
    h.update(seed.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Running maximum over successful trials; negative infinity before the first.
pub fn best_so_far(history: &TrialHistory) -> Vec<f64> {
    let mut best = f64::NEG_INFINITY;
    history
        .trials()
        .iter()
        .map(|t| {
            if t.is_ok() {
                best = best.max(t.score());
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub objective: String,
    pub strategy: String,
    pub seed: u64,
    pub cell_seed: u64,
    pub budget: usize,
    pub final_best: Option<f64>,
    /// Sum of per-trial wall times, seconds.
    pub time_s: f64,
    /// Best-so-far per attempted trial; `None` before the first success.
    pub trace: Vec<Option<f64>>,
    pub trials: Vec<strategies::Trial>,
    #[serde(default)]
    pub exhausted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CellResult {
    fn file_name(objective: &str, strategy: &str, seed: u64) -> String {
        let clean = |s: &str| -> String {
            s.chars()
                .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
                .collect()
        };
        format!("{}__{}__{seed}.json", clean(objective), clean(strategy))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub objective: String,
    pub strategy: String,
    pub median_score: Option<f64>,
    pub median_time_s: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub budget: usize,
    pub cells: Vec<CellResult>,
    pub summary: Vec<SummaryRow>,
}

/// Median of the values; even counts average the two middle ones.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

impl BenchmarkReport {
    /// Builds the summary from cells; row order follows first appearance.
    pub fn from_cells(budget: usize, cells: Vec<CellResult>) -> Self {
        let mut keys: Vec<(String, String)> = Vec::new();
        for c in &cells {
            let key = (c.objective.clone(), c.strategy.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let summary = keys
            .into_iter()
            .map(|(objective, strategy)| {
                let group: Vec<&CellResult> = cells
                    .iter()
                    .filter(|c| c.objective == objective && c.strategy == strategy)
                    .collect();
                let scores: Vec<f64> = group.iter().filter_map(|c| c.final_best).collect();
                let times: Vec<f64> = group.iter().map(|c| c.time_s).collect();
                SummaryRow {
                    objective,
                    strategy,
                    median_score: median(&scores),
                    median_time_s: median(&times).unwrap_or(0.0),
                    cells: group.len(),
                }
            })
            .collect();
        BenchmarkReport {
            budget,
            cells,
            summary,
        }
    }

    pub fn load(dir: &Path) -> Result<Self, BenchError> {
        let path = dir.join("report.json");
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|source| BenchError::Json { path, source })
    }

    /// Copy with every wall-time field zeroed, for comparisons across runs.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for c in &mut r.cells {
            c.time_s = 0.0;
            for t in &mut c.trials {
                t.elapsed = 0.0;
            }
        }
        for s in &mut r.summary {
            s.median_time_s = 0.0;
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Table,
    TraceRows,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ExportFormat::Table),
            "trace-rows" => Ok(ExportFormat::TraceRows),
            other => Err(format!("unknown export format `{other}` (table, trace-rows)")),
        }
    }
}

fn render(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn export_report(report: &BenchmarkReport, format: ExportFormat) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match format {
        ExportFormat::Table => {
            w.write_record(["objective", "strategy", "score", "time_s"])?;
            for row in &report.summary {
                w.write_record([
                    row.objective.clone(),
                    row.strategy.clone(),
                    render(row.median_score),
                    row.median_time_s.to_string(),
                ])?;
            }
        }
        ExportFormat::TraceRows => {
            w.write_record(["objective", "strategy", "seed", "iteration", "best_so_far"])?;
            for cell in &report.cells {
                for (i, v) in cell.trace.iter().enumerate() {
                    w.write_record([
                        cell.objective.clone(),
                        cell.strategy.clone(),
                        cell.seed.to_string(),
                        i.to_string(),
                        render(*v),
                    ])?;
                }
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Pool(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), BenchError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Result of [`run_benchmark`] with how many cells ran versus came from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub report: BenchmarkReport,
    pub executed: usize,
    pub resumed: usize,
}

struct CellJob<'a> {
    objective: &'a ObjectiveSpec,
    strategy: &'a StrategyEntry,
    seed: u64,
    path: PathBuf,
}

fn run_cell(job: &CellJob<'_>, plan: &BenchmarkPlan) -> CellResult {
    let name = job.objective.name().to_string();
    let seed = cell_seed(plan.base_seed, &name, &job.strategy.label, job.seed);
    let mut result = CellResult {
        objective: name,
        strategy: job.strategy.label.clone(),
        seed: job.seed,
        cell_seed: seed,
        budget: plan.budget,
        final_best: None,
        time_s: 0.0,
        trace: Vec::new(),
        trials: Vec::new(),
        exhausted: false,
        error: None,
    };
    let config = job.strategy.config.clone().with_seed(seed);
    let outcome = job
        .objective
        .build()
        .and_then(|mut objective| Ok(strategies::run(&config, objective.as_mut(), plan.budget)?));
    match outcome {
        Ok(history) => {
            let trace = best_so_far(&history);
            result.final_best = trace.last().copied().filter(|v| v.is_finite());
            result.trace = trace.into_iter().map(|v| v.is_finite().then_some(v)).collect();
            result.time_s = history.trials().iter().map(|t| t.elapsed).sum();
            result.exhausted = history.exhausted;
            result.trials = history.trials().to_vec();
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    result
}

fn load_cell(path: &Path, job: &CellJob<'_>, budget: usize) -> Option<CellResult> {
    let text = fs::read_to_string(path).ok()?;
    let cell: CellResult = serde_json::from_str(&text).ok()?;
    (cell.objective == job.objective.name()
        && cell.strategy == job.strategy.label
        && cell.seed == job.seed
        && cell.budget == budget)
        .then_some(cell)
}

/// Executes every (objective, strategy, seed) cell of `plan`.
///
/// Objectives are resolved before anything runs. Cells already present under
/// `<output>/cells/` are reused instead of re-executed.
pub fn run_benchmark(plan: &BenchmarkPlan) -> Result<BenchmarkRun, BenchError> {
    plan.validate()?;
    for o in &plan.objectives {
        o.build()?;
    }
    let cells_dir = plan.output.join("cells");
    fs::create_dir_all(&cells_dir).map_err(io_err(&cells_dir))?;

    let mut jobs = Vec::new();
    for objective in &plan.objectives {
        for strategy in &plan.strategies {
            for &seed in &plan.seeds {
                let path = cells_dir.join(CellResult::file_name(objective.name(), &strategy.label, seed));
                jobs.push(CellJob {
                    objective,
                    strategy,
                    seed,
                    path,
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.parallelism)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    let outcomes: Vec<Result<(CellResult, bool), BenchError>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                if let Some(cell) = load_cell(&job.path, job, plan.budget) {
                    return Ok((cell, false));
                }
                let cell = run_cell(job, plan);
                let text = serde_json::to_vec_pretty(&cell).expect("cell serializes");
                write_atomic(&job.path, &text)?;
                Ok((cell, true))
            })
            .collect()
    });

    let mut cells = Vec::with_capacity(outcomes.len());
    let mut executed = 0;
    for outcome in outcomes {
        let (cell, ran) = outcome?;
        executed += usize::from(ran);
        cells.push(cell);
    }
    let resumed = cells.len() - executed;
    let report = BenchmarkReport::from_cells(plan.budget, cells);
    let text = serde_json::to_vec_pretty(&report).expect("report serializes");
    write_atomic(&plan.output.join("report.json"), &text)?;
    Ok(BenchmarkRun {
        report,
        executed,
        resumed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Configuration;
    use crate::strategies::Trial;

    fn history(values: &[Option<f64>]) -> TrialHistory {
        let space = SearchSpace::new("empty", vec![]).unwrap();
        let mut h = TrialHistory::new(space);
        for (i, v) in values.iter().enumerate() {
            let t = match v {
                Some(v) => Trial::ok(i as u64, Configuration::new(), *v, 0.0),
                None => Trial::failed(i as u64, Configuration::new(), "x", 0.0),
            };
            h.push(t).unwrap();
        }
        h
    }

    fn plan(dir: &Path, objectives: &[&str], strategies: &[StrategyKind], seeds: usize) -> BenchmarkPlan {
        let mut p = BenchmarkPlan::new(
            objectives.iter().map(|o| ObjectiveSpec::Synthetic(o.to_string())).collect(),
            strategies.iter().map(|&k| StrategyEntry::new(StrategyConfig::new(k))).collect(),
            (0..seeds as u64).collect(),
            dir,
        );
        p.budget = 12;
        p
    }

    #[test]
    fn best_so_far_examples() {
        assert_eq!(best_so_far(&history(&[Some(0.3), Some(0.1), Some(0.5)])), vec![0.3, 0.3, 0.5]);
        assert!(best_so_far(&history(&[None, None])).iter().all(|v| *v == f64::NEG_INFINITY));
        assert_eq!(best_so_far(&history(&[Some(0.7)])), vec![0.7]);
        assert_eq!(
            best_so_far(&history(&[None, Some(0.2), None, Some(0.1)])),
            vec![f64::NEG_INFINITY, 0.2, 0.2, 0.2]
        );
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[0.9, 0.1, 0.2]), Some(0.2));
        assert_eq!(median(&[0.1, 0.2, 0.4, 0.9]), Some(0.30000000000000004));
        assert_eq!(median(&[]), None);
    }

    fn one_cell(final_best: Option<f64>, time_s: f64, trace: Vec<Option<f64>>) -> CellResult {
        CellResult {
            objective: "sphere5".into(),
            strategy: "random".into(),
            seed: 0,
            cell_seed: 0,
            budget: trace.len(),
            final_best,
            time_s,
            trace,
            trials: vec![],
            exhausted: false,
            error: None,
        }
    }

    #[test]
    fn export_examples() {
        let report = BenchmarkReport::from_cells(2, vec![one_cell(Some(0.9), 12.0, vec![None, Some(0.9)])]);
        let table = export_report(&report, ExportFormat::Table).unwrap();
        assert_eq!(table, "objective,strategy,score,time_s\nsphere5,random,0.9,12\n");
        let rows = export_report(&report, ExportFormat::TraceRows).unwrap();
        assert_eq!(
            rows,
            "objective,strategy,seed,iteration,best_so_far\nsphere5,random,0,0,\nsphere5,random,0,1,0.9\n"
        );
    }

    #[test]
    fn cell_seeds_differ() {
        let a = cell_seed(0, "sphere5", "random", 0);
        assert_eq!(a, cell_seed(0, "sphere5", "random", 0));
        assert_ne!(a, cell_seed(0, "sphere5", "random", 1));
        assert_ne!(a, cell_seed(0, "sphere5", "tpe", 0));
        assert_ne!(a, cell_seed(1, "sphere5", "random", 0));
        assert_ne!(cell_seed(0, "ab", "c", 0), cell_seed(0, "a", "bc", 0));
    }

    #[test]
    fn single_cell_trace_has_budget_length() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = plan(dir.path(), &["sphere5"], &[StrategyKind::Random], 1);
        p.budget = 50;
        let run = run_benchmark(&p).unwrap();
        assert_eq!(run.report.cells.len(), 1);
        assert_eq!(run.report.cells[0].trace.len(), 50);
        assert!(dir.path().join("report.json").exists());
        let rows = export_report(&run.report, ExportFormat::TraceRows).unwrap();
        assert_eq!(rows.lines().count(), 51);
    }

    #[test]
    fn grid_of_thirty_cells_and_resume() {
        let dir = tempfile::tempdir().unwrap();
        let p = plan(
            dir.path(),
            &["sphere5", "branin2"],
            &[StrategyKind::Random, StrategyKind::Tpe, StrategyKind::Pso],
            5,
        );
        let first = run_benchmark(&p).unwrap();
        assert_eq!(first.report.cells.len(), 30);
        assert_eq!((first.executed, first.resumed), (30, 0));
        assert_eq!(first.report.summary.len(), 6);
        for c in &first.report.cells {
            assert!(c.trace.windows(2).all(|w| w[0] <= w[1]));
        }

        fs::remove_file(dir.path().join("report.json")).unwrap();
        let second = run_benchmark(&p).unwrap();
        assert_eq!((second.executed, second.resumed), (0, 30));
        assert_eq!(second.report, first.report);
        assert_eq!(BenchmarkReport::load(dir.path()).unwrap(), first.report);
    }

    #[test]
    fn partial_cells_are_completed() {
        let dir = tempfile::tempdir().unwrap();
        let p = plan(dir.path(), &["sphere5"], &[StrategyKind::Random], 3);
        run_benchmark(&p).unwrap();
        let victim = dir.path().join("cells").join(CellResult::file_name("sphere5", "random", 1));
        fs::remove_file(&victim).unwrap();
        let run = run_benchmark(&p).unwrap();
        assert_eq!((run.executed, run.resumed), (1, 2));
        assert!(victim.exists());
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let a_dir = tempfile::tempdir().unwrap();
        let b_dir = tempfile::tempdir().unwrap();
        let kinds = [StrategyKind::Random, StrategyKind::GpEi, StrategyKind::Pso];
        let a = plan(a_dir.path(), &["branin2"], &kinds, 3);
        let mut b = plan(b_dir.path(), &["branin2"], &kinds, 3);
        b.parallelism = 4;
        let ra = run_benchmark(&a).unwrap().report.without_timings();
        let rb = run_benchmark(&b).unwrap().report.without_timings();
        assert_eq!(ra, rb);
    }

    #[test]
    fn unresolvable_names_abort_early() {
        let dir = tempfile::tempdir().unwrap();
        let p = plan(dir.path(), &["sphere5", "nope"], &[StrategyKind::Random], 1);
        assert!(matches!(run_benchmark(&p), Err(BenchError::Objective(_))));
        assert!(!dir.path().join("cells").exists());
    }

    #[test]
    fn plan_parsing() {
        let p = BenchmarkPlan::from_json(
            r#"{
                "objectives": ["branin2", {"name": "mlp", "space": "mlp_table4", "worker": "python3 w.py"}],
                "strategies": ["random", {"kind": "tpe", "gamma": 0.3, "label": "tpe30"}],
                "seeds": [0, 1, 2]
            }"#,
        )
        .unwrap();
        assert_eq!(p.budget, 50);
        assert_eq!(p.strategies[1].label, "tpe30");
        assert_eq!(p.strategies[1].config.gamma, 0.3);
        assert_eq!(p.objectives[1].name(), "mlp");
        p.validate().unwrap();
        let round: BenchmarkPlan = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(round, p);

        assert!(BenchmarkPlan::from_json(r#"{"objectives": ["x"], "strategies": ["smac"], "seeds": [0]}"#).is_err());
        let empty = BenchmarkPlan::from_json(r#"{"objectives": [], "strategies": ["random"], "seeds": [0]}"#).unwrap();
        assert!(empty.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn best_so_far_is_monotone(values in proptest::collection::vec(proptest::option::of(-1e6f64..1e6), 0..60)) {
            let h = history(&values);
            let trace = best_so_far(&h);
            proptest::prop_assert_eq!(trace.len(), values.len());
            proptest::prop_assert!(trace.windows(2).all(|w| w[0] <= w[1]));
            for (i, v) in trace.iter().enumerate() {
                let expected = values[..=i].iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
                proptest::prop_assert_eq!(*v, expected);
            }
        }
    }
}
