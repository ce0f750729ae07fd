//! Search strategies behind one suggest/observe interface, and the driver loop.
//!
//! An [`Optimizer`] owns the state of one strategy instance. The driver asks
//! it for a [`Suggestion`], evaluates the configuration, appends the resulting
//! [`Trial`] to the [`TrialHistory`] and reports it back through
//! [`Optimizer::observe`]. Suggestions are serialized: a new one may only be
//! requested once every earlier suggestion has been observed.

mod gp_ei;
mod grid;
mod pso;
mod tpe;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::AcquisitionError;
use crate::gp::GpError;
use crate::objectives::Objective;
use crate::space::{Configuration, Domain, SearchSpace, SpaceError, UnitVector, Value};

pub use gp_ei::surrogate_data;
pub use grid::default_grid_points;
pub use pso::{Particle, SwarmState};
pub use tpe::{tpe_score, tpe_split, ParzenSet, TpeSample};

/// Random number stream used by every strategy.
pub type SearchRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("invalid strategy configuration: {0}")]
    InvalidConfig(String),
    #[error("grid exhausted after {0} points")]
    GridExhausted(usize),
    #[error("history is inconsistent with strategy state: {0}")]
    InconsistentHistory(String),
    #[error("trial {0} was never suggested")]
    UnknownTrial(u64),
    #[error("trial {0} was already observed")]
    DoubleObservation(u64),
    #[error("trial {0} is still pending")]
    NotFinal(u64),
    #[error("need at least {needed} successful trials, have {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    Grid,
    GpEi,
    Tpe,
    Pso,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Random,
        StrategyKind::Grid,
        StrategyKind::GpEi,
        StrategyKind::Tpe,
        StrategyKind::Pso,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Grid => "grid",
            StrategyKind::GpEi => "gp_ei",
            StrategyKind::Tpe => "tpe",
            StrategyKind::Pso => "pso",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| StrategyError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub seed: u64,
    /// Random trials before any model is fitted (gp_ei, tpe).
    pub n_init: usize,
    pub gamma: f64,
    /// Candidates drawn from the good-set density per TPE suggestion.
    pub candidates: usize,
    /// Uniform starts per EI maximization.
    pub acquisition_budget: usize,
    pub swarm_size: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub grid_points_per_dim: Option<usize>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            kind: StrategyKind::Random,
            seed: 0,
            n_init: 5,
            gamma: 0.25,
            candidates: 64,
            acquisition_budget: crate::acquisition::DEFAULT_BUDGET,
            swarm_size: 10,
            inertia: 0.7298,
            cognitive: 1.49618,
            social: 1.49618,
            grid_points_per_dim: None,
        }
    }
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        StrategyConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        let bad = |m: String| Err(StrategyError::InvalidConfig(m));
        for (name, v) in [
            ("n_init", self.n_init),
            ("candidates", self.candidates),
            ("acquisition_budget", self.acquisition_budget),
            ("swarm_size", self.swarm_size),
        ] {
            if v < 1 {
                return bad(format!("{name} must be >= 1"));
            }
        }
        if self.grid_points_per_dim == Some(0) {
            return bad("grid_points_per_dim must be >= 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Pending,
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: u64,
    pub config: Configuration,
    pub value: Option<f64>,
    pub status: TrialStatus,
    /// Wall time of the suggestion plus its evaluation, seconds.
    pub elapsed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl Trial {
    pub fn ok(id: u64, config: Configuration, value: f64, elapsed: f64) -> Self {
        Trial {
            id,
            config,
            value: Some(value),
            status: TrialStatus::Ok,
            elapsed,
            failure: None,
        }
    }

    pub fn failed(id: u64, config: Configuration, reason: impl Into<String>, elapsed: f64) -> Self {
        Trial {
            id,
            config,
            value: None,
            status: TrialStatus::Failed,
            elapsed,
            failure: Some(reason.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == TrialStatus::Ok
    }

    /// Score used for ranking; failures rank below everything.
    pub fn score(&self) -> f64 {
        match (self.status, self.value) {
            (TrialStatus::Ok, Some(v)) => v,
            _ => f64::NEG_INFINITY,
        }
    }
}

/// Observations collected so far over one space.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialHistory {
    space: SearchSpace,
    trials: Vec<Trial>,
    /// Set when a grid ran out of points before the budget was spent.
    pub exhausted: bool,
}

impl TrialHistory {
    pub fn new(space: SearchSpace) -> Self {
        TrialHistory {
            space,
            trials: Vec::new(),
            exhausted: false,
        }
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn ok_trials(&self) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(|t| t.is_ok())
    }

    /// Appends a trial after checking the history invariants.
    pub fn push(&mut self, trial: Trial) -> Result<(), StrategyError> {
        if let Some(last) = self.trials.last() {
            if trial.id <= last.id {
                return Err(StrategyError::InconsistentHistory(format!(
                    "trial id {} does not follow {}",
                    trial.id, last.id
                )));
            }
        }
        if trial.status == TrialStatus::Ok && !trial.value.is_some_and(f64::is_finite) {
            return Err(StrategyError::InconsistentHistory(format!(
                "trial {} is ok without a finite value",
                trial.id
            )));
        }
        self.space.validate(&trial.config)?;
        self.trials.push(trial);
        Ok(())
    }

    /// Best successful trial; the earliest wins ties.
    pub fn best(&self) -> Option<&Trial> {
        self.ok_trials()
            .fold(None, |best: Option<&Trial>, t| match best {
                Some(b) if b.score() >= t.score() => Some(b),
                _ => Some(t),
            })
    }
}

/// Output of [`Optimizer::suggest`].
#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub id: u64,
    pub config: Configuration,
    /// The suggestion duplicates an observed point after all resampling retries.
    pub duplicate_fallback: bool,
}

enum State {
    Random,
    Grid(grid::GridState),
    GpEi,
    Tpe,
    Pso(SwarmState),
}

pub struct Optimizer {
    config: StrategyConfig,
    space: SearchSpace,
    state: State,
    next_id: u64,
    pending: Option<(u64, Option<usize>)>,
    observed: BTreeSet<u64>,
}

impl Optimizer {
    pub fn new(config: StrategyConfig, space: SearchSpace) -> Result<Self, StrategyError> {
        Self::with_budget(config, space, None)
    }

    /// `budget` sizes the default grid lattice when `grid_points_per_dim` is unset.
    pub fn with_budget(
        config: StrategyConfig,
        space: SearchSpace,
        budget: Option<usize>,
    ) -> Result<Self, StrategyError> {
        config.validate()?;
        let state = match config.kind {
            StrategyKind::Random => State::Random,
            StrategyKind::Grid => {
                let points = config
                    .grid_points_per_dim
                    .unwrap_or_else(|| default_grid_points(&space, budget.unwrap_or(50)));
                State::Grid(grid::GridState::new(&space, points))
            }
            StrategyKind::GpEi => State::GpEi,
            StrategyKind::Tpe => State::Tpe,
            StrategyKind::Pso => State::Pso(SwarmState::default()),
        };
        Ok(Optimizer {
            config,
            space,
            state,
            next_id: 0,
            pending: None,
            observed: BTreeSet::new(),
        })
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.config
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn swarm(&self) -> Option<&SwarmState> {
        match &self.state {
            State::Pso(s) => Some(s),
            _ => None,
        }
    }

    fn check_history(&self, history: &TrialHistory) -> Result<(), StrategyError> {
        if let Some((id, _)) = self.pending {
            return Err(StrategyError::InconsistentHistory(format!(
                "trial {id} has not been observed yet"
            )));
        }
        if history.len() != self.observed.len()
            || history.trials().iter().any(|t| !self.observed.contains(&t.id))
        {
            return Err(StrategyError::InconsistentHistory(format!(
                "history holds {} trials, strategy observed {}",
                history.len(),
                self.observed.len()
            )));
        }
        Ok(())
    }

    pub fn suggest<R: Rng + ?Sized>(
        &mut self,
        history: &TrialHistory,
        rng: &mut R,
    ) -> Result<Suggestion, StrategyError> {
        self.check_history(history)?;
        let id = self.next_id;
        let mut particle = None;
        let mut duplicate_fallback = false;
        let config = match &mut self.state {
            State::Random => self.space.sample(rng),
            State::Grid(g) => g.next(&self.space)?,
            State::GpEi => {
                let (config, fallback) = gp_ei::suggest(&self.config, &self.space, history, rng)?;
                duplicate_fallback = fallback;
                config
            }
            State::Tpe => tpe::suggest(&self.config, &self.space, history, rng)?,
            State::Pso(swarm) => {
                let (index, position) = swarm.advance(&self.config, self.space.dim(), rng);
                particle = Some(index);
                self.space.decode(&position)?
            }
        };
        self.next_id += 1;
        self.pending = Some((id, particle));
        Ok(Suggestion {
            id,
            config,
            duplicate_fallback,
        })
    }

    pub fn observe(&mut self, trial: &Trial) -> Result<(), StrategyError> {
        if trial.status == TrialStatus::Pending {
            return Err(StrategyError::NotFinal(trial.id));
        }
        if self.observed.contains(&trial.id) {
            return Err(StrategyError::DoubleObservation(trial.id));
        }
        let particle = match self.pending {
            Some((id, particle)) if id == trial.id => particle,
            _ => return Err(StrategyError::UnknownTrial(trial.id)),
        };
        if let (State::Pso(swarm), Some(i)) = (&mut self.state, particle) {
            swarm.record(i, trial.score());
        }
        self.pending = None;
        self.observed.insert(trial.id);
        Ok(())
    }
}

/// Encodings of every trial in the history, in order.
pub(crate) fn encoded_history(
    space: &SearchSpace,
    history: &TrialHistory,
) -> Result<Vec<UnitVector>, SpaceError> {
    history.trials().iter().map(|t| space.encode(&t.config)).collect()
}

pub(crate) fn branch_count(space: &SearchSpace, root: usize) -> usize {
    match &space.params()[root].domain {
        Domain::Categorical { values } => values.len(),
        _ => 0,
    }
}

pub(crate) fn branch_value(space: &SearchSpace, root: usize, ordinal: usize) -> Value {
    match &space.params()[root].domain {
        Domain::Categorical { values } => Value::Cat(values[ordinal].clone()),
        _ => Value::Cat(String::new()),
    }
}

/// Ordinal of the root value assigned by `trial`.
pub(crate) fn branch_ordinal(space: &SearchSpace, root: usize, trial: &Trial) -> Option<usize> {
    let value = trial.config.get(&space.params()[root].name)?.as_str()?;
    match &space.params()[root].domain {
        Domain::Categorical { values } => values.iter().position(|v| v == value),
        _ => None,
    }
}

/// First root value that no trial has used yet, if the space branches.
pub(crate) fn untried_branch(space: &SearchSpace, history: &TrialHistory) -> Option<(usize, Value)> {
    let root = space.branch_root()?;
    (0..branch_count(space, root))
        .find(|&b| !history.trials().iter().any(|t| branch_ordinal(space, root, t) == Some(b)))
        .map(|b| (root, branch_value(space, root, b)))
}

/// Runs `budget` suggest/evaluate/observe rounds against `objective`.
///
/// Evaluation failures become failed trials; grid exhaustion ends the run early.
pub fn run(
    config: &StrategyConfig,
    objective: &mut dyn Objective,
    budget: usize,
) -> Result<TrialHistory, StrategyError> {
    if budget == 0 {
        return Err(StrategyError::InvalidConfig("budget must be >= 1".into()));
    }
    let space = objective.space().clone();
    let mut rng = SearchRng::seed_from_u64(config.seed);
    let mut optimizer = Optimizer::with_budget(config.clone(), space.clone(), Some(budget))?;
    let mut history = TrialHistory::new(space);
    for _ in 0..budget {
        let start = Instant::now();
        let suggestion = match optimizer.suggest(&history, &mut rng) {
            Ok(s) => s,
            Err(StrategyError::GridExhausted(_)) => {
                history.exhausted = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let result = objective.evaluate(suggestion.id, &suggestion.config);
        let elapsed = start.elapsed().as_secs_f64();
        let trial = match result {
            Ok(v) if v.is_finite() => Trial::ok(suggestion.id, suggestion.config, v, elapsed),
            Ok(v) => Trial::failed(suggestion.id, suggestion.config, format!("non-finite score {v}"), elapsed),
            Err(e) => Trial::failed(suggestion.id, suggestion.config, e.to_string(), elapsed),
        };
        history.push(trial.clone())?;
        optimizer.observe(&trial)?;
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::synthetic;

    #[test]
    fn config_validation() {
        assert!(StrategyConfig::default().validate().is_ok());
        let mut c = StrategyConfig::new(StrategyKind::Tpe);
        c.gamma = 1.0;
        assert!(c.validate().is_err());
        let mut c = StrategyConfig::new(StrategyKind::Pso);
        c.swarm_size = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn strategy_kind_names() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("smac".parse::<StrategyKind>().is_err());
        let c: StrategyConfig = serde_json::from_str(r#"{"kind": "gp_ei", "n_init": 3}"#).unwrap();
        assert_eq!(c.kind, StrategyKind::GpEi);
        assert_eq!(c.n_init, 3);
        assert_eq!(c.gamma, 0.25);
    }

    #[test]
    fn observe_errors() {
        let f = synthetic("sphere5").unwrap();
        let space = f.space().clone();
        let mut opt = Optimizer::new(StrategyConfig::default(), space.clone()).unwrap();
        let mut history = TrialHistory::new(space);
        let mut rng = SearchRng::seed_from_u64(0);
        let s = opt.suggest(&history, &mut rng).unwrap();
        assert!(matches!(
            opt.suggest(&history, &mut rng),
            Err(StrategyError::InconsistentHistory(_))
        ));
        let mut pending = Trial::ok(s.id, s.config.clone(), 0.0, 0.0);
        pending.status = TrialStatus::Pending;
        assert_eq!(opt.observe(&pending), Err(StrategyError::NotFinal(0)));
        let stranger = Trial::ok(9, s.config.clone(), 0.0, 0.0);
        assert_eq!(opt.observe(&stranger), Err(StrategyError::UnknownTrial(9)));
        let t = Trial::ok(s.id, s.config, -1.0, 0.0);
        opt.observe(&t).unwrap();
        assert_eq!(opt.observe(&t), Err(StrategyError::DoubleObservation(0)));
        // history was not updated
        assert!(matches!(
            opt.suggest(&history, &mut rng),
            Err(StrategyError::InconsistentHistory(_))
        ));
        history.push(t).unwrap();
        assert_eq!(opt.suggest(&history, &mut rng).unwrap().id, 1);
    }

    #[test]
    fn history_invariants() {
        let f = synthetic("sphere5").unwrap();
        let mut rng = SearchRng::seed_from_u64(0);
        let c = f.space().sample(&mut rng);
        let mut h = TrialHistory::new(f.space().clone());
        h.push(Trial::ok(0, c.clone(), 1.0, 0.0)).unwrap();
        assert!(h.push(Trial::ok(0, c.clone(), 1.0, 0.0)).is_err());
        let mut bad = Trial::ok(1, c.clone(), 1.0, 0.0);
        bad.value = Some(f64::NAN);
        assert!(h.push(bad).is_err());
        assert!(h.push(Trial::ok(1, Configuration::new(), 1.0, 0.0)).is_err());
        h.push(Trial::failed(2, c, "boom", 0.0)).unwrap();
        assert_eq!(h.best().unwrap().id, 0);
    }

    #[test]
    fn run_counts_trials() {
        let mut f = synthetic("sphere5").unwrap();
        let h = run(&StrategyConfig::new(StrategyKind::Random), &mut f, 50).unwrap();
        assert_eq!(h.len(), 50);
        assert!(h.trials().iter().enumerate().all(|(i, t)| t.id == i as u64));
        let h = run(&StrategyConfig::new(StrategyKind::Random), &mut f, 1).unwrap();
        assert_eq!(h.len(), 1);
        let mut rng = SearchRng::seed_from_u64(0);
        assert_eq!(h.trials()[0].config, f.space().sample(&mut rng));
        assert!(run(&StrategyConfig::default(), &mut f, 0).is_err());
    }

    #[test]
    fn run_is_deterministic() {
        for kind in StrategyKind::ALL {
            let config = StrategyConfig::new(kind).with_seed(21);
            let mut f = synthetic("sphere5").unwrap();
            let a = run(&config, &mut f, 20).unwrap();
            let b = run(&config, &mut f, 20).unwrap();
            for (x, y) in a.trials().iter().zip(b.trials()) {
                assert_eq!(x.config, y.config, "{kind}");
                assert_eq!(x.value.map(f64::to_bits), y.value.map(f64::to_bits));
            }
        }
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::objectives::synthetic;
    use crate::space::{ParamSpec, Transform};
    use proptest::prelude::*;

    struct Nested {
        space: SearchSpace,
    }

    impl Objective for Nested {
        fn name(&self) -> &str {
            "nested"
        }

        fn space(&self) -> &SearchSpace {
            &self.space
        }

        fn evaluate(&mut self, trial_id: u64, config: &Configuration) -> Result<f64, crate::objectives::EvalError> {
            if trial_id % 7 == 3 {
                return Err(crate::objectives::EvalError::Worker("flaky".into()));
            }
            Ok(config.iter().filter_map(|(_, v)| v.as_f64()).map(|x| -(x - 0.4).abs()).sum())
        }

        fn is_deterministic(&self) -> bool {
            true
        }
    }

    fn nested() -> Nested {
        let space = SearchSpace::new(
            "nested",
            vec![
                ParamSpec::categorical("model", &["tree", "linear"]),
                ParamSpec::categorical("split", &["gini", "entropy", "log"]).when("model", "tree"),
                ParamSpec::integer("depth", 1, 12, Transform::Linear).when("model", "tree"),
                ParamSpec::real("min_gain", 1e-4, 1.0, Transform::Log).when("split", "log"),
                ParamSpec::real("c", 1e-3, 10.0, Transform::Log).when("model", "linear"),
                ParamSpec::real("frac", 0.05, 0.95, Transform::Logit),
            ],
        )
        .unwrap();
        Nested { space }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn suggestions_are_valid_and_runs_repeat(seed in any::<u64>(), k in 0usize..5) {
            let kind = StrategyKind::ALL[k];
            let mut config = StrategyConfig::new(kind).with_seed(seed);
            config.acquisition_budget = 64;
            let mut obj = nested();
            let a = run(&config, &mut obj, 25).unwrap();
            for t in a.trials() {
                prop_assert!(obj.space().validate(&t.config).is_ok());
            }
            let b = run(&config, &mut obj, 25).unwrap();
            let key = |h: &TrialHistory| -> Vec<_> {
                h.trials().iter().map(|t| (t.id, t.config.clone(), t.value, t.status)).collect()
            };
            prop_assert_eq!(key(&a), key(&b));
        }

        #[test]
        fn cash_synthetic_suggestions_are_valid(seed in any::<u64>(), k in 0usize..5) {
            let mut config = StrategyConfig::new(StrategyKind::ALL[k]).with_seed(seed);
            config.acquisition_budget = 64;
            let mut f = synthetic("cash_synthetic").unwrap();
            let h = run(&config, &mut f, 20).unwrap();
            for t in h.trials() {
                prop_assert!(f.space().validate(&t.config).is_ok());
            }
        }
    }
}

