use rand::Rng;
use rand_distr::StandardNormal;

use super::{branch_count, branch_ordinal, untried_branch, StrategyConfig, StrategyError, Trial, TrialHistory};
use crate::acquisition::standard_normal;
use crate::space::{Configuration, SearchSpace, SpaceError, UnitVector};

const MIN_BANDWIDTH: f64 = 0.05;

/// Splits the history into the best `ceil(gamma * n_ok)` successful trials
/// and the rest. Failed trials always land in the second group. Ties keep
/// trial id order.
pub fn tpe_split(history: &TrialHistory, gamma: f64) -> Result<(Vec<&Trial>, Vec<&Trial>), StrategyError> {
    let mut ok: Vec<&Trial> = history.ok_trials().collect();
    if ok.len() < 2 {
        return Err(StrategyError::InsufficientHistory {
            needed: 2,
            got: ok.len(),
        });
    }
    ok.sort_by(|a, b| b.score().total_cmp(&a.score()));
    let n_good = ((gamma * ok.len() as f64).ceil() as usize).clamp(1, ok.len() - 1);
    let mut bad = ok.split_off(n_good);
    bad.extend(history.trials().iter().filter(|t| !t.is_ok()));
    Ok((ok, bad))
}

/// Product of per-coordinate truncated Gaussian mixtures over `[0, 1]`.
///
/// Each coordinate only mixes the points where that parameter is active;
/// a coordinate with no such point has the uniform density.
#[derive(Debug, Clone, PartialEq)]
pub struct ParzenSet {
    points: Vec<Vec<Option<f64>>>,
    bandwidth: Vec<f64>,
}

impl ParzenSet {
    /// `points` pairs each encoded point with its activity mask.
    pub fn new(dim: usize, points: &[(UnitVector, Vec<bool>)]) -> Self {
        let points: Vec<Vec<Option<f64>>> = points
            .iter()
            .map(|(x, mask)| (0..dim).map(|j| mask[j].then(|| x[j])).collect())
            .collect();
        let bandwidth = (0..dim)
            .map(|j| {
                let vals: Vec<f64> = points.iter().filter_map(|p| p[j]).collect();
                let n = vals.len();
                if n < 2 {
                    return MIN_BANDWIDTH;
                }
                let mean = vals.iter().sum::<f64>() / n as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (1.06 * var.sqrt() * (n as f64).powf(-0.2)).max(MIN_BANDWIDTH)
            })
            .collect();
        ParzenSet { points, bandwidth }
    }

    pub fn from_trials(space: &SearchSpace, trials: &[&Trial]) -> Result<Self, SpaceError> {
        let points = trials
            .iter()
            .map(|t| Ok((space.encode(&t.config)?, space.active_mask(&t.config))))
            .collect::<Result<Vec<_>, SpaceError>>()?;
        Ok(Self::new(space.dim(), &points))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    /// Density of coordinate `j` at `x`.
    pub fn coordinate_density(&self, j: usize, x: f64) -> f64 {
        let h = self.bandwidth[j];
        let mut total = 0.0;
        let mut n = 0usize;
        for c in self.points.iter().filter_map(|p| p[j]) {
            let mass = standard_normal((1.0 - c) / h).1 - standard_normal(-c / h).1;
            total += standard_normal((x - c) / h).0 / (h * mass);
            n += 1;
        }
        if n == 0 {
            1.0
        } else {
            total / n as f64
        }
    }

    /// Log density of `x` over the coordinates flagged in `active`.
    pub fn log_density(&self, x: &UnitVector, active: &[bool]) -> f64 {
        (0..x.len())
            .filter(|&j| active[j])
            .map(|j| self.coordinate_density(j, x[j]).ln())
            .sum()
    }

    /// Draws one point: a uniformly chosen component, perturbed per coordinate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = rng.random_range(0..self.points.len());
        self.sample_component(rng, k)
    }

    /// Draws around component `k`; coordinates inactive there are uniform.
    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R, k: usize) -> Vec<f64> {
        self.points[k]
            .iter()
            .zip(&self.bandwidth)
            .map(|(c, &h)| match c {
                Some(c) => truncated_normal(rng, *c, h),
                None => rng.random::<f64>(),
            })
            .collect()
    }
}

fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, center: f64, h: f64) -> f64 {
    for _ in 0..64 {
        let v = center + h * rng.sample::<f64, _>(StandardNormal);
        if (0.0..=1.0).contains(&v) {
            return v;
        }
    }
    center.clamp(0.0, 1.0)
}

/// Density ratio `l(x) / g(x)` of the good and bad sets.
pub fn tpe_score(candidate: &UnitVector, active: &[bool], good: &ParzenSet, bad: &ParzenSet) -> f64 {
    (good.log_density(candidate, active) - bad.log_density(candidate, active)).exp()
}

/// Optional pinned `(root index, coordinate)` and the good points to draw around.
type CandidateGroup = (Option<(usize, f64)>, Vec<usize>);

/// A scored draw from the good-set density.
#[derive(Debug, Clone, PartialEq)]
pub struct TpeSample {
    pub x: UnitVector,
    pub log_ratio: f64,
}

pub(super) fn suggest<R: Rng + ?Sized>(
    config: &StrategyConfig,
    space: &SearchSpace,
    history: &TrialHistory,
    rng: &mut R,
) -> Result<Configuration, StrategyError> {
    if history.len() < config.n_init || history.ok_trials().count() < 2 {
        return Ok(space.sample(rng));
    }
    if let Some((root, value)) = untried_branch(space, history) {
        return Ok(space.sample_pinned(rng, &[(root, value)]));
    }
    let (good_trials, bad_trials) = tpe_split(history, config.gamma)?;
    let good = ParzenSet::from_trials(space, &good_trials)?;
    let bad = ParzenSet::from_trials(space, &bad_trials)?;

    // candidate groups: one per observed branch, each drawing from its own good points
    let groups: Vec<CandidateGroup> = match space.branch_root() {
        Some(root) => {
            let m = branch_count(space, root);
            (0..m)
                .filter(|&b| history.trials().iter().any(|t| branch_ordinal(space, root, t) == Some(b)))
                .map(|b| {
                    let members = (0..good_trials.len())
                        .filter(|&k| branch_ordinal(space, root, good_trials[k]) == Some(b))
                        .collect();
                    (Some((root, (b as f64 + 0.5) / m as f64)), members)
                })
                .collect()
        }
        None => vec![(None, (0..good.len()).collect())],
    };

    let mut best: Option<TpeSample> = None;
    for (pin, members) in &groups {
        for _ in 0..config.candidates {
            let mut coords = if members.is_empty() {
                (0..space.dim()).map(|_| rng.random::<f64>()).collect()
            } else {
                let k = members[rng.random_range(0..members.len())];
                good.sample_component(rng, k)
            };
            if let Some((i, c)) = *pin {
                coords[i] = c;
            }
            let x = space.canonicalize(&UnitVector::clamped(coords))?;
            let active = space.active_mask(&space.decode(&x)?);
            let log_ratio = good.log_density(&x, &active) - bad.log_density(&x, &active);
            if best.as_ref().is_none_or(|b| log_ratio > b.log_ratio) {
                best = Some(TpeSample { x, log_ratio });
            }
        }
    }
    let best = best.expect("at least one candidate");
    Ok(space.decode(&best.x)?)
}
