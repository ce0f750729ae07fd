use super::StrategyError;
use crate::space::{Configuration, Domain, ParamSpec, SearchSpace, UnitVector, INACTIVE_SLOT};

/// Points per numeric dimension so that a full grid roughly fills `budget`.
pub fn default_grid_points(space: &SearchSpace, budget: usize) -> usize {
    let numeric = space
        .params()
        .iter()
        .filter(|p| !p.domain.is_categorical())
        .count();
    if numeric == 0 {
        return 2;
    }
    let g = (budget.max(1) as f64).powf(1.0 / numeric as f64);
    // guard against powf landing a hair above an exact integer root
    let g = (g - 1e-9).ceil() as usize;
    g.max(2)
}

/// Unit coordinates visited along one parameter.
fn lattice(spec: &ParamSpec, points: usize) -> Vec<f64> {
    let raw: Vec<f64> = if points == 1 {
        vec![0.5]
    } else {
        (0..points).map(|k| k as f64 / (points - 1) as f64).collect()
    };
    match &spec.domain {
        Domain::Real { .. } => raw,
        Domain::Integer { .. } => {
            let mut coords: Vec<f64> = raw.iter().map(|&u| spec.to_unit(&spec.from_unit(u))).collect();
            coords.dedup();
            coords
        }
        Domain::Categorical { values } => {
            let m = values.len();
            (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect()
        }
    }
}

/// Mixed-radix walk over the active parameters, first parameter slowest.
pub(super) struct GridState {
    lattices: Vec<Vec<f64>>,
    digits: Vec<usize>,
    started: bool,
    emitted: usize,
}

impl GridState {
    pub(super) fn new(space: &SearchSpace, points: usize) -> Self {
        GridState {
            lattices: space
                .params()
                .iter()
                .map(|p| lattice(p, points))
                .collect(),
            digits: vec![0; space.dim()],
            started: false,
            emitted: 0,
        }
    }

    fn current(&self, space: &SearchSpace) -> Result<Configuration, StrategyError> {
        let coords = self
            .digits
            .iter()
            .zip(&self.lattices)
            .map(|(&k, l)| l.get(k).copied().unwrap_or(INACTIVE_SLOT))
            .collect();
        Ok(space.decode(&UnitVector::new(coords)?)?)
    }

    fn increment(&mut self, space: &SearchSpace) -> Result<bool, StrategyError> {
        let active = space.active_mask(&self.current(space)?);
        for &i in space.topological_order().iter().rev() {
            if !active[i] {
                continue;
            }
            if self.digits[i] + 1 < self.lattices[i].len() {
                self.digits[i] += 1;
                return Ok(true);
            }
            self.digits[i] = 0;
        }
        Ok(false)
    }

    pub(super) fn next(&mut self, space: &SearchSpace) -> Result<Configuration, StrategyError> {
        if self.started && !self.increment(space)? {
            return Err(StrategyError::GridExhausted(self.emitted));
        }
        self.started = true;
        self.emitted += 1;
        self.current(space)
    }
}
