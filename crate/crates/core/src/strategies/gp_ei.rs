use rand::Rng;

use super::{branch_count, branch_value, encoded_history, untried_branch, StrategyConfig, StrategyError, TrialHistory};
use crate::acquisition::{AcquisitionSearch, Candidate, Incumbent};
use crate::gp::{GpConfig, GpModel, Normalization};
use crate::space::{Configuration, SearchSpace, SpaceError, UnitVector};

const DUPLICATE_RETRIES: usize = 10;

/// Encoded inputs and targets of the successful trials, optionally restricted
/// to one branch given as `(root index, value ordinal)`.
pub fn surrogate_data(
    space: &SearchSpace,
    history: &TrialHistory,
    branch: Option<(usize, usize)>,
) -> Result<(Vec<UnitVector>, Vec<f64>), SpaceError> {
    let label = branch.map(|(root, ordinal)| branch_value(space, root, ordinal));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for t in history.ok_trials() {
        if let (Some((root, _)), Some(label)) = (branch, &label) {
            if t.config.get(&space.params()[root].name) != Some(label) {
                continue;
            }
        }
        xs.push(space.encode(&t.config)?);
        ys.push(t.score());
    }
    Ok((xs, ys))
}

fn population_stats(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt().max(1e-12))
}

pub(super) fn suggest<R: Rng + ?Sized>(
    config: &StrategyConfig,
    space: &SearchSpace,
    history: &TrialHistory,
    rng: &mut R,
) -> Result<(Configuration, bool), StrategyError> {
    let (xs, ys) = surrogate_data(space, history, None)?;
    if history.len() < config.n_init || xs.is_empty() {
        return Ok((space.sample(rng), false));
    }
    let incumbent = Incumbent::from_observations(&xs, &ys).expect("non-empty observations");

    // (model, pinned root coordinate) per modelled region
    let mut models: Vec<(GpModel, Option<(usize, f64)>)> = Vec::new();
    match space.branch_root() {
        Some(root) => {
            if let Some((root, value)) = untried_branch(space, history) {
                return Ok((space.sample_pinned(rng, &[(root, value)]), false));
            }
            let m = branch_count(space, root);
            let (offset, scale) = population_stats(&ys);
            let gp = GpConfig {
                normalization: Normalization::Fixed { offset, scale },
                ..GpConfig::default()
            };
            for b in 0..m {
                let (bx, by) = surrogate_data(space, history, Some((root, b)))?;
                if bx.is_empty() {
                    continue;
                }
                let coord = (b as f64 + 0.5) / m as f64;
                models.push((GpModel::fit(bx, by, gp)?, Some((root, coord))));
            }
        }
        None => models.push((GpModel::fit(xs, ys, GpConfig::default())?, None)),
    }

    let observed = encoded_history(space, history)?;
    let mut last = None;
    for _ in 0..=DUPLICATE_RETRIES {
        let mut best: Option<Candidate> = None;
        for (model, pin) in &models {
            let mut search = AcquisitionSearch::with_budget(config.acquisition_budget);
            if let Some((i, coord)) = *pin {
                search = search.pin(i, coord);
            }
            let c = search.maximize(model, &incumbent, space, rng)?;
            if best.as_ref().is_none_or(|b| c.ei > b.ei) {
                best = Some(c);
            }
        }
        let x = best.expect("at least one model").x;
        if !observed.iter().any(|o| o.as_slice() == x.as_slice()) {
            return Ok((space.decode(&x)?, false));
        }
        last = Some(x);
    }
    Ok((space.decode(&last.expect("at least one attempt"))?, true))
}
