//! Conditional mixed-type search spaces.
//!
//! A [`SearchSpace`] is an ordered list of parameters. Each parameter is a
//! real, integer, or categorical dimension, and may be conditioned on a
//! categorical parent taking a particular value. Condition edges form a
//! forest, so the set of active parameters of a configuration is determined
//! top-down from the unconditioned roots.
//!
//! Numeric models work on [`UnitVector`]s: one coordinate in `[0, 1]` per
//! parameter, in declaration order. Real and integer parameters are mapped
//! through their transform (linear, log, logit), categoricals are bucketed
//! ordinally into `(i + 0.5) / m`, and inactive slots hold [`INACTIVE_SLOT`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coordinate stored for parameters that are inactive in a configuration.
pub const INACTIVE_SLOT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("malformed space document: {0}")]
    Malformed(String),
    #[error("parameter `{name}`: unknown kind `{kind}`")]
    UnknownKind { name: String, kind: String },
    #[error("parameter `{name}`: unknown transform `{transform}`")]
    UnknownTransform { name: String, transform: String },
    #[error("parameter `{name}`: range violation: {detail}")]
    RangeViolation { name: String, detail: String },
    #[error("parameter `{name}`: {detail}")]
    InvalidParam { name: String, detail: String },
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("parameter `{name}`: invalid condition: {detail}")]
    InvalidCondition { name: String, detail: String },
    #[error("parameter `{0}`: cyclic conditions")]
    CyclicCondition(String),
    #[error("configuration does not match space: {0}")]
    Mismatch(String),
    #[error("dimension mismatch: space has {expected} parameters, vector has {got}")]
    Dimension { expected: usize, got: usize },
    #[error("coordinate {index} = {value} is outside [0, 1]")]
    OutOfUnit { index: usize, value: f64 },
}

/// Monotone map applied to a numeric range before scaling it onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Linear,
    Log,
    Logit,
}

impl Transform {
    pub fn forward(self, x: f64) -> f64 {
        match self {
            Transform::Linear => x,
            Transform::Log => x.ln(),
            Transform::Logit => (x / (1.0 - x)).ln(),
        }
    }

    pub fn inverse(self, y: f64) -> f64 {
        match self {
            Transform::Linear => y,
            Transform::Log => y.exp(),
            Transform::Logit => 1.0 / (1.0 + (-y).exp()),
        }
    }

    fn parse(name: &str, s: &str) -> Result<Self, SpaceError> {
        match s {
            "linear" | "real" => Ok(Transform::Linear),
            "log" => Ok(Transform::Log),
            "logit" => Ok(Transform::Logit),
            other => Err(SpaceError::UnknownTransform {
                name: name.to_string(),
                transform: other.to_string(),
            }),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Transform::Linear => "linear",
            Transform::Log => "log",
            Transform::Logit => "logit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Real { low: f64, high: f64, transform: Transform },
    Integer { low: i64, high: i64, transform: Transform },
    Categorical { values: Vec<String> },
}

impl Domain {
    pub fn kind(&self) -> &'static str {
        match self {
            Domain::Real { .. } => "real",
            Domain::Integer { .. } => "integer",
            Domain::Categorical { .. } => "categorical",
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, Domain::Categorical { .. })
    }
}

/// Parameter is active only while `parent` holds `value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub parent: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub domain: Domain,
    pub condition: Option<Condition>,
}

impl ParamSpec {
    pub fn real(name: &str, low: f64, high: f64, transform: Transform) -> Self {
        ParamSpec {
            name: name.to_string(),
            domain: Domain::Real { low, high, transform },
            condition: None,
        }
    }

    pub fn integer(name: &str, low: i64, high: i64, transform: Transform) -> Self {
        ParamSpec {
            name: name.to_string(),
            domain: Domain::Integer { low, high, transform },
            condition: None,
        }
    }

    pub fn categorical<S: AsRef<str>>(name: &str, values: &[S]) -> Self {
        ParamSpec {
            name: name.to_string(),
            domain: Domain::Categorical {
                values: values.iter().map(|v| v.as_ref().to_string()).collect(),
            },
            condition: None,
        }
    }

    pub fn when(mut self, parent: &str, value: &str) -> Self {
        self.condition = Some(Condition {
            parent: parent.to_string(),
            value: value.to_string(),
        });
        self
    }

    fn validate(&self) -> Result<(), SpaceError> {
        let range = |detail: String| SpaceError::RangeViolation {
            name: self.name.clone(),
            detail,
        };
        if self.name.trim().is_empty() || self.name.trim() != self.name {
            return Err(SpaceError::InvalidParam {
                name: self.name.clone(),
                detail: "name must be a non-empty identifier".into(),
            });
        }
        let (low, high, transform) = match &self.domain {
            Domain::Real { low, high, transform } => (*low, *high, *transform),
            Domain::Integer { low, high, transform } => (*low as f64, *high as f64, *transform),
            Domain::Categorical { values } => {
                if values.is_empty() {
                    return Err(range("categorical value list is empty".into()));
                }
                let mut seen = BTreeSet::new();
                for v in values {
                    if !seen.insert(v.as_str()) {
                        return Err(range(format!("duplicate categorical value `{v}`")));
                    }
                }
                return Ok(());
            }
        };
        if !low.is_finite() || !high.is_finite() {
            return Err(range("bounds must be finite".into()));
        }
        if low >= high {
            return Err(range(format!("low ({low}) must be < high ({high})")));
        }
        match transform {
            Transform::Linear => {}
            Transform::Log if low <= 0.0 => {
                return Err(range(format!("log transform requires low > 0, got {low}")));
            }
            Transform::Logit if low <= 0.0 || high >= 1.0 => {
                return Err(range(format!(
                    "logit transform requires 0 < low < high < 1, got ({low}, {high})"
                )));
            }
            _ => {}
        }
        Ok(())
    }

    /// Checks that `value` has the right type and lies in range.
    pub fn check(&self, value: &Value) -> Result<(), String> {
        match (&self.domain, value) {
            (Domain::Real { low, high, .. }, Value::Real(x)) => {
                if x.is_finite() && *x >= *low && *x <= *high {
                    Ok(())
                } else {
                    Err(format!("`{}` = {x} outside [{low}, {high}]", self.name))
                }
            }
            (Domain::Integer { low, high, .. }, Value::Int(n)) => {
                if n >= low && n <= high {
                    Ok(())
                } else {
                    Err(format!("`{}` = {n} outside [{low}, {high}]", self.name))
                }
            }
            (Domain::Categorical { values }, Value::Cat(s)) => {
                if values.iter().any(|v| v == s) {
                    Ok(())
                } else {
                    Err(format!("`{}` = `{s}` is not one of its values", self.name))
                }
            }
            (domain, value) => Err(format!(
                "`{}` expects a {} value, got {value}",
                self.name,
                domain.kind()
            )),
        }
    }

    /// Maps a valid value onto `[0, 1]`.
    pub fn to_unit(&self, value: &Value) -> f64 {
        match (&self.domain, value) {
            (Domain::Real { low, high, transform }, Value::Real(x)) => {
                scale_to_unit(*x, *low, *high, *transform)
            }
            (Domain::Integer { low, high, transform }, Value::Int(n)) => {
                scale_to_unit(*n as f64, *low as f64, *high as f64, *transform)
            }
            (Domain::Categorical { values }, Value::Cat(s)) => {
                let i = values.iter().position(|v| v == s).unwrap_or(0);
                (i as f64 + 0.5) / values.len() as f64
            }
            _ => INACTIVE_SLOT,
        }
    }

    pub fn from_unit(&self, u: f64) -> Value {
        match &self.domain {
            Domain::Real { low, high, transform } => {
                Value::Real(scale_from_unit(u, *low, *high, *transform).clamp(*low, *high))
            }
            Domain::Integer { low, high, transform } => {
                let x = scale_from_unit(u, *low as f64, *high as f64, *transform);
                Value::Int((x.round() as i64).clamp(*low, *high))
            }
            Domain::Categorical { values } => Value::Cat(values[bucket(u, values.len())].clone()),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Value {
        match &self.domain {
            Domain::Integer {
                low,
                high,
                transform: Transform::Linear,
            } => Value::Int(rng.random_range(*low..=*high)),
            Domain::Categorical { values } => {
                Value::Cat(values[rng.random_range(0..values.len())].clone())
            }
            _ => self.from_unit(rng.random::<f64>()),
        }
    }
}

fn scale_to_unit(x: f64, low: f64, high: f64, transform: Transform) -> f64 {
    let (a, b) = (transform.forward(low), transform.forward(high));
    ((transform.forward(x) - a) / (b - a)).clamp(0.0, 1.0)
}

fn scale_from_unit(u: f64, low: f64, high: f64, transform: Transform) -> f64 {
    let (a, b) = (transform.forward(low), transform.forward(high));
    transform.inverse(a + u * (b - a))
}

fn bucket(u: f64, m: usize) -> usize {
    ((u * m as f64).floor().max(0.0) as usize).min(m - 1)
}

/// A concrete parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
    Cat(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(n) => Some(*n as f64),
            Value::Real(x) => Some(*x),
            Value::Cat(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Cat(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Real(x) => write!(f, "{x}"),
            Value::Cat(s) => write!(f, "{s}"),
        }
    }
}

/// Assignment of values to the active parameters of a space.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(BTreeMap<String, Value>);

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Value) -> Option<Value> {
        self.0.insert(name.into(), value)
    }

    pub fn remove(&mut self, name: &str) -> Option<Value> {
        self.0.remove(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

impl FromIterator<(String, Value)> for Configuration {
    fn from_iter<I: IntoIterator<Item = (String, Value)>>(iter: I) -> Self {
        Configuration(iter.into_iter().collect())
    }
}

/// Point in the unit hypercube, one coordinate per parameter of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    pub fn new(coords: Vec<f64>) -> Result<Self, SpaceError> {
        if let Some((index, &value)) = coords
            .iter()
            .enumerate()
            .find(|(_, c)| !(0.0..=1.0).contains(*c))
        {
            return Err(SpaceError::OutOfUnit { index, value });
        }
        Ok(UnitVector(coords))
    }

    /// Builds a vector by clamping every coordinate into `[0, 1]`; NaN maps to the inactive sentinel.
    pub fn clamped(coords: Vec<f64>) -> Self {
        UnitVector(
            coords
                .into_iter()
                .map(|c| if c.is_nan() { INACTIVE_SLOT } else { c.clamp(0.0, 1.0) })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn squared_distance(&self, other: &UnitVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

impl std::ops::Index<usize> for UnitVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    name: String,
    params: Vec<ParamSpec>,
    index: HashMap<String, usize>,
    // (parent index, ordinal of the required parent value)
    parents: Vec<Option<(usize, usize)>>,
    topo: Vec<usize>,
}

impl SearchSpace {
    pub fn new(name: impl Into<String>, params: Vec<ParamSpec>) -> Result<Self, SpaceError> {
        let mut index = HashMap::with_capacity(params.len());
        for (i, p) in params.iter().enumerate() {
            p.validate()?;
            if index.insert(p.name.clone(), i).is_some() {
                return Err(SpaceError::DuplicateName(p.name.clone()));
            }
        }

        let mut parents = Vec::with_capacity(params.len());
        for p in &params {
            let Some(cond) = &p.condition else {
                parents.push(None);
                continue;
            };
            let invalid = |detail: String| SpaceError::InvalidCondition {
                name: p.name.clone(),
                detail,
            };
            let &pi = index
                .get(&cond.parent)
                .ok_or_else(|| invalid(format!("parent `{}` does not exist", cond.parent)))?;
            let Domain::Categorical { values } = &params[pi].domain else {
                return Err(invalid(format!("parent `{}` is not categorical", cond.parent)));
            };
            let ordinal = values
                .iter()
                .position(|v| *v == cond.value)
                .ok_or_else(|| {
                    invalid(format!(
                        "`{}` is not a value of parent `{}`",
                        cond.value, cond.parent
                    ))
                })?;
            parents.push(Some((pi, ordinal)));
        }

        // Kahn-style pass that keeps declaration order among ready nodes.
        let n = params.len();
        let mut placed = vec![false; n];
        let mut topo = Vec::with_capacity(n);
        while topo.len() < n {
            let before = topo.len();
            for i in 0..n {
                if !placed[i] && parents[i].is_none_or(|(p, _)| placed[p]) {
                    placed[i] = true;
                    topo.push(i);
                }
            }
            if topo.len() == before {
                let stuck = (0..n).find(|&i| !placed[i]).unwrap_or(0);
                return Err(SpaceError::CyclicCondition(params[stuck].name.clone()));
            }
        }

        Ok(SearchSpace {
            name: name.into(),
            params,
            index,
            parents,
            topo,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Parameter indices ordered so that every parent precedes its children.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// `(parent index, required value ordinal)` of a conditioned parameter.
    pub fn parent_of(&self, i: usize) -> Option<(usize, usize)> {
        self.parents[i]
    }

    /// First unconditioned categorical that other parameters are conditioned on.
    pub fn branch_root(&self) -> Option<usize> {
        (0..self.dim()).find(|&i| {
            self.parents[i].is_none()
                && self.params[i].domain.is_categorical()
                && self.parents.iter().any(|p| p.is_some_and(|(pi, _)| pi == i))
        })
    }

    /// Activity flag per parameter (declaration order) for a possibly partial assignment.
    pub fn active_mask(&self, partial: &Configuration) -> Vec<bool> {
        let mut active = vec![false; self.dim()];
        for &i in &self.topo {
            active[i] = match self.parents[i] {
                None => true,
                Some((p, ordinal)) => {
                    active[p] && self.holds_ordinal(p, partial.get(&self.params[p].name), ordinal)
                }
            };
        }
        active
    }

    fn holds_ordinal(&self, p: usize, value: Option<&Value>, ordinal: usize) -> bool {
        match (&self.params[p].domain, value) {
            (Domain::Categorical { values }, Some(Value::Cat(s))) => values[ordinal] == *s,
            _ => false,
        }
    }

    /// Names of the parameters whose condition chain is satisfied by `partial`.
    pub fn active_parameters(&self, partial: &Configuration) -> BTreeSet<String> {
        self.active_mask(partial)
            .into_iter()
            .zip(&self.params)
            .filter(|(a, _)| *a)
            .map(|(_, p)| p.name.clone())
            .collect()
    }

    /// Checks that `config` assigns exactly the active parameters, each within range.
    pub fn validate(&self, config: &Configuration) -> Result<(), SpaceError> {
        for name in config.names() {
            if !self.index.contains_key(name) {
                return Err(SpaceError::Mismatch(format!("unknown parameter `{name}`")));
            }
        }
        let active = self.active_mask(config);
        for (p, is_active) in self.params.iter().zip(active) {
            match (config.get(&p.name), is_active) {
                (Some(v), true) => p.check(v).map_err(SpaceError::Mismatch)?,
                (None, true) => {
                    return Err(SpaceError::Mismatch(format!(
                        "active parameter `{}` is missing",
                        p.name
                    )))
                }
                (Some(_), false) => {
                    return Err(SpaceError::Mismatch(format!(
                        "parameter `{}` is assigned but its condition is unmet",
                        p.name
                    )))
                }
                (None, false) => {}
            }
        }
        Ok(())
    }

    /// Draws a configuration uniformly in each parameter's transformed coordinate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        self.sample_pinned(rng, &[])
    }

    /// Like [`SearchSpace::sample`] but with some parameters fixed to given values.
    ///
    /// Pinned values are used as-is when their parameter is active.
    pub fn sample_pinned<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        pins: &[(usize, Value)],
    ) -> Configuration {
        let mut config = Configuration::new();
        let mut active = vec![false; self.dim()];
        for &i in &self.topo {
            active[i] = match self.parents[i] {
                None => true,
                Some((p, ordinal)) => {
                    active[p] && self.holds_ordinal(p, config.get(&self.params[p].name), ordinal)
                }
            };
            if active[i] {
                let spec = &self.params[i];
                let value = match pins.iter().find(|(pi, _)| *pi == i) {
                    Some((_, v)) => v.clone(),
                    None => spec.sample(rng),
                };
                config.insert(spec.name.clone(), value);
            }
        }
        config
    }

    pub fn encode(&self, config: &Configuration) -> Result<UnitVector, SpaceError> {
        self.validate(config)?;
        Ok(UnitVector(
            self.params
                .iter()
                .map(|p| config.get(&p.name).map_or(INACTIVE_SLOT, |v| p.to_unit(v)))
                .collect(),
        ))
    }

    pub fn decode(&self, v: &UnitVector) -> Result<Configuration, SpaceError> {
        if v.len() != self.dim() {
            return Err(SpaceError::Dimension {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let mut config = Configuration::new();
        let mut active = vec![false; self.dim()];
        for &i in &self.topo {
            active[i] = match self.parents[i] {
                None => true,
                Some((p, ordinal)) => {
                    active[p] && self.holds_ordinal(p, config.get(&self.params[p].name), ordinal)
                }
            };
            if active[i] {
                let spec = &self.params[i];
                config.insert(spec.name.clone(), spec.from_unit(v[i]));
            }
        }
        Ok(config)
    }

    /// Snaps a vector onto the image of `encode`: integer and categorical
    /// slots move to their representable points, inactive slots to the sentinel.
    pub fn canonicalize(&self, v: &UnitVector) -> Result<UnitVector, SpaceError> {
        self.encode(&self.decode(v)?)
    }

    pub fn to_document(&self) -> String {
        let doc = RawSpace {
            name: self.name.clone(),
            params: self.params.iter().map(RawParam::from_spec).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("space documents always serialize")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    name: String,
    #[serde(default)]
    params: Vec<RawParam>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParam {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transform: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    condition: Option<Condition>,
}

impl RawParam {
    fn from_spec(p: &ParamSpec) -> Self {
        let (low, high, values, transform) = match &p.domain {
            Domain::Real { low, high, transform } => (Some(*low), Some(*high), None, Some(*transform)),
            Domain::Integer { low, high, transform } => {
                (Some(*low as f64), Some(*high as f64), None, Some(*transform))
            }
            Domain::Categorical { values } => (None, None, Some(values.clone()), None),
        };
        RawParam {
            name: p.name.clone(),
            kind: p.domain.kind().to_string(),
            low,
            high,
            values,
            transform: transform.map(|t| t.as_str().to_string()),
            condition: p.condition.clone(),
        }
    }

    fn into_spec(self) -> Result<ParamSpec, SpaceError> {
        let name = self.name;
        let missing = |field: &str| SpaceError::InvalidParam {
            name: name.clone(),
            detail: format!("missing field `{field}`"),
        };
        let domain = match self.kind.as_str() {
            "real" | "integer" => {
                let low = self.low.ok_or_else(|| missing("low"))?;
                let high = self.high.ok_or_else(|| missing("high"))?;
                if self.values.is_some() {
                    return Err(SpaceError::InvalidParam {
                        name,
                        detail: "numeric parameters take low/high, not values".into(),
                    });
                }
                let transform = match &self.transform {
                    Some(t) => Transform::parse(&name, t)?,
                    None => Transform::Linear,
                };
                if self.kind == "real" {
                    Domain::Real { low, high, transform }
                } else {
                    if low.fract() != 0.0 || high.fract() != 0.0 {
                        return Err(SpaceError::RangeViolation {
                            name,
                            detail: format!("integer bounds must be integral, got ({low}, {high})"),
                        });
                    }
                    Domain::Integer {
                        low: low as i64,
                        high: high as i64,
                        transform,
                    }
                }
            }
            "categorical" => {
                if self.low.is_some() || self.high.is_some() || self.transform.is_some() {
                    return Err(SpaceError::InvalidParam {
                        name,
                        detail: "categorical parameters take values only".into(),
                    });
                }
                Domain::Categorical {
                    values: self.values.ok_or_else(|| missing("values"))?,
                }
            }
            other => {
                return Err(SpaceError::UnknownKind {
                    name,
                    kind: other.to_string(),
                })
            }
        };
        Ok(ParamSpec {
            name,
            domain,
            condition: self.condition,
        })
    }
}

/// Parses and validates a space-definition document (JSON object notation).
pub fn parse_space(document: &str) -> Result<SearchSpace, SpaceError> {
    let raw: RawSpace =
        serde_json::from_str(document).map_err(|e| SpaceError::Malformed(e.to_string()))?;
    let params = raw
        .params
        .into_iter()
        .map(RawParam::into_spec)
        .collect::<Result<Vec<_>, _>>()?;
    SearchSpace::new(raw.name, params)
}
