//! Expected Improvement and its maximization over a search space.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::gp::{GpError, GpModel};
use crate::space::{SearchSpace, SpaceError, UnitVector};

/// Default number of uniform candidates scored per acquisition step.
pub const DEFAULT_BUDGET: usize = 1024;

/// Standard deviations below this are treated as zero.
const SIGMA_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AcquisitionError {
    #[error("non-finite acquisition input: mu={mu}, sigma={sigma}, f_plus={f_plus}")]
    NonFinite { mu: f64, sigma: f64, f_plus: f64 },
    #[error("negative sigma {0}")]
    NegativeSigma(f64),
    #[error("candidate budget must be at least 1")]
    EmptyBudget,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// Complementary error function, Chebyshev fit with fractional error below 1.2e-7.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98
                                + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77))))))));
    let ans = t * poly.exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Density and distribution function of the standard normal at `z`.
pub fn standard_normal(z: f64) -> (f64, f64) {
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let cdf = 0.5 * erfc(-z / std::f64::consts::SQRT_2);
    (pdf, cdf)
}

/// Closed-form `E[max(0, f - f_plus)]` for `f ~ N(mu, sigma^2)`.
pub fn expected_improvement(mu: f64, sigma: f64, f_plus: f64) -> Result<f64, AcquisitionError> {
    if !mu.is_finite() || sigma.is_nan() || !f_plus.is_finite() {
        return Err(AcquisitionError::NonFinite { mu, sigma, f_plus });
    }
    if sigma < 0.0 {
        return Err(AcquisitionError::NegativeSigma(sigma));
    }
    if sigma < SIGMA_EPS {
        return Ok(0.0);
    }
    let improvement = mu - f_plus;
    let z = improvement / sigma;
    let (pdf, cdf) = standard_normal(z);
    Ok((improvement * cdf + sigma * pdf).max(0.0))
}

/// Best observation so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub x_plus: UnitVector,
    pub f_plus: f64,
}

impl Incumbent {
    /// Picks the first input attaining the maximal target.
    pub fn from_observations(inputs: &[UnitVector], targets: &[f64]) -> Option<Self> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &y) in targets.iter().enumerate() {
            if best.is_none_or(|(_, b)| y > b) {
                best = Some((i, y));
            }
        }
        best.map(|(i, f_plus)| Incumbent {
            x_plus: inputs[i].clone(),
            f_plus,
        })
    }
}

/// Scored candidate returned by the acquisition search.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub x: UnitVector,
    pub ei: f64,
}

/// Random multi-start search with Gaussian refinement around the best starts.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionSearch {
    pub budget: usize,
    pub refine_seeds: usize,
    pub perturbations: usize,
    pub step: f64,
    /// Coordinates held fixed in every candidate (before canonicalization).
    pub pinned: Vec<(usize, f64)>,
}

impl Default for AcquisitionSearch {
    fn default() -> Self {
        AcquisitionSearch {
            budget: DEFAULT_BUDGET,
            refine_seeds: 5,
            perturbations: 10,
            step: 0.05,
            pinned: Vec::new(),
        }
    }
}

impl AcquisitionSearch {
    pub fn with_budget(budget: usize) -> Self {
        AcquisitionSearch {
            budget,
            ..Default::default()
        }
    }

    pub fn pin(mut self, index: usize, coord: f64) -> Self {
        self.pinned.push((index, coord));
        self
    }

    fn prepare(&self, space: &SearchSpace, mut coords: Vec<f64>) -> Result<UnitVector, SpaceError> {
        for &(i, c) in &self.pinned {
            coords[i] = c;
        }
        space.canonicalize(&UnitVector::clamped(coords))
    }

    fn score(&self, model: &GpModel, inc: &Incumbent, x: &UnitVector) -> Result<f64, AcquisitionError> {
        let post = model.posterior(x)?;
        expected_improvement(post.mean, post.std_dev(), inc.f_plus)
    }

    /// Returns the candidate with the largest EI; ties go to the earliest generated.
    ///
    /// With a budget of one only the single random candidate is produced.
    pub fn maximize<R: Rng + ?Sized>(
        &self,
        model: &GpModel,
        inc: &Incumbent,
        space: &SearchSpace,
        rng: &mut R,
    ) -> Result<Candidate, AcquisitionError> {
        if self.budget == 0 {
            return Err(AcquisitionError::EmptyBudget);
        }
        let d = space.dim();
        let mut starts = Vec::with_capacity(self.budget);
        for _ in 0..self.budget {
            let coords: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let x = self.prepare(space, coords)?;
            let ei = self.score(model, inc, &x)?;
            starts.push(Candidate { x, ei });
        }

        let mut best = 0;
        for (i, c) in starts.iter().enumerate() {
            if c.ei > starts[best].ei {
                best = i;
            }
        }
        if self.budget == 1 {
            return Ok(starts.swap_remove(0));
        }

        // stable sort keeps generation order among equal scores
        let mut order: Vec<usize> = (0..starts.len()).collect();
        order.sort_by(|&a, &b| starts[b].ei.total_cmp(&starts[a].ei));
        let mut winner = starts[best].clone();
        for &seed in order.iter().take(self.refine_seeds) {
            for _ in 0..self.perturbations {
                let coords: Vec<f64> = starts[seed]
                    .x
                    .as_slice()
                    .iter()
                    .map(|&c| c + self.step * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let x = self.prepare(space, coords)?;
                let ei = self.score(model, inc, &x)?;
                if ei > winner.ei {
                    winner = Candidate { x, ei };
                }
            }
        }
        Ok(winner)
    }
}

/// Maximizes EI with the default refinement settings and `budget` random starts.
pub fn maximize_acquisition<R: Rng + ?Sized>(
    model: &GpModel,
    inc: &Incumbent,
    space: &SearchSpace,
    rng: &mut R,
    budget: usize,
) -> Result<UnitVector, AcquisitionError> {
    AcquisitionSearch::with_budget(budget)
        .maximize(model, inc, space, rng)
        .map(|c| c.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::GpConfig;
    use crate::space::{ParamSpec, Transform};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_space(d: usize) -> SearchSpace {
        SearchSpace::new(
            "unit",
            (0..d)
                .map(|i| ParamSpec::real(&format!("x{i}"), 0.0, 1.0, Transform::Linear))
                .collect(),
        )
        .unwrap()
    }

    fn uv(c: &[f64]) -> UnitVector {
        UnitVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn normal_at_zero() {
        let (pdf, cdf) = standard_normal(0.0);
        assert!((pdf - 0.398_942_3).abs() < 1e-7);
        assert!((cdf - 0.5).abs() < 1e-7);
    }

    #[test]
    fn normal_tails() {
        let (pdf, cdf) = standard_normal(-8.0);
        assert!(cdf < 1e-14);
        assert!(pdf < 1e-13);
        let (_, upper) = standard_normal(8.0);
        assert!((1.0 - upper) < 1e-14);
    }

    #[test]
    fn normal_cdf_is_symmetric() {
        for i in -80..=80 {
            let z = i as f64 * 0.1;
            let (_, a) = standard_normal(z);
            let (_, b) = standard_normal(-z);
            assert!((a - (1.0 - b)).abs() <= 1e-7);
        }
    }

    #[test]
    fn ei_examples() {
        assert_eq!(expected_improvement(5.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(expected_improvement(-5.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(expected_improvement(0.3, 1e-13, 0.1).unwrap(), 0.0);
        let ei = expected_improvement(2.0, 1.0, 2.0).unwrap();
        assert!((ei - 0.398_942_3).abs() < 1e-7);
        assert!(expected_improvement(f64::NAN, 1.0, 0.0).is_err());
        assert!(expected_improvement(0.0, f64::NAN, 0.0).is_err());
        assert!(expected_improvement(0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn ei_vanishes_far_below_incumbent() {
        let ei = expected_improvement(-40.0, 1.0, 0.0).unwrap();
        assert!(ei < 1e-300);
        let a = expected_improvement(-5.0, 1.0, 0.0).unwrap();
        let b = expected_improvement(-10.0, 1.0, 0.0).unwrap();
        assert!(b < a && a < 1e-6);
    }

    #[test]
    fn ei_strictly_increases_in_mu() {
        for sigma in [0.01, 0.3, 1.0, 4.0] {
            let mut prev = -1.0;
            for i in 0..=400 {
                let mu = -2.0 + i as f64 * 0.01;
                let ei = expected_improvement(mu, sigma, 0.5).unwrap();
                if prev > 1e-280 {
                    assert!(ei > prev, "sigma={sigma} mu={mu}");
                }
                prev = ei;
            }
        }
    }

    #[test]
    fn ei_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let mu = rng.random_range(-3.0..3.0);
            let sigma = rng.random_range(0.01..2.0);
            let f = rng.random_range(-3.0..3.0);
            let base = expected_improvement(mu, sigma, f).unwrap();
            // dyadic inputs keep every sum exact, so equality is bitwise
            let dy = |x: f64| (x * 1024.0).round() / 1024.0;
            let (dmu, df) = (dy(mu), dy(f));
            let dbase = expected_improvement(dmu, sigma, df).unwrap();
            let c = rng.random_range(-64..64) as f64 / 8.0;
            assert_eq!(expected_improvement(dmu + c, sigma, df + c).unwrap(), dbase);
            let a = 2f64.powi(rng.random_range(-3..4));
            assert_eq!(expected_improvement(a * mu, a * sigma, a * f).unwrap(), a * base);
            // general shifts agree to rounding
            let c = rng.random_range(-10.0..10.0);
            let shifted = expected_improvement(mu + c, sigma, f + c).unwrap();
            assert!((shifted - base).abs() <= 1e-12 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn incumbent_takes_first_maximum() {
        let xs = vec![uv(&[0.1]), uv(&[0.2]), uv(&[0.3])];
        let inc = Incumbent::from_observations(&xs, &[1.0, 3.0, 3.0]).unwrap();
        assert_eq!(inc.f_plus, 3.0);
        assert_eq!(inc.x_plus, uv(&[0.2]));
        assert!(Incumbent::from_observations(&[], &[]).is_none());
    }

    #[test]
    fn budget_one_returns_the_random_candidate() {
        let space = unit_space(3);
        let model = GpModel::fit(vec![uv(&[0.5, 0.5, 0.5])], vec![1.0], GpConfig::default()).unwrap();
        let inc = Incumbent::from_observations(model.inputs(), model.targets()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut replay = rng.clone();
        let x = maximize_acquisition(&model, &inc, &space, &mut rng, 1).unwrap();
        let expected: Vec<f64> = (0..3).map(|_| replay.random::<f64>()).collect();
        assert_eq!(x.as_slice(), expected.as_slice());
        assert!(matches!(
            maximize_acquisition(&model, &inc, &space, &mut rng, 0),
            Err(AcquisitionError::EmptyBudget)
        ));
    }

    #[test]
    fn maximizer_beats_observed_point() {
        let space = unit_space(2);
        let obs = uv(&[0.4, 0.6]);
        let model = GpModel::fit(vec![obs.clone()], vec![0.7], GpConfig::default()).unwrap();
        let inc = Incumbent::from_observations(model.inputs(), model.targets()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = AcquisitionSearch::default().maximize(&model, &inc, &space, &mut rng).unwrap();
        let post = model.posterior(&obs).unwrap();
        let at_obs = expected_improvement(post.mean, post.std_dev(), inc.f_plus).unwrap();
        assert!(at_obs < 1e-4);
        assert!(c.ei >= at_obs);
    }

    #[test]
    fn deterministic_under_seed() {
        let space = unit_space(2);
        let model = GpModel::fit(
            vec![uv(&[0.1, 0.2]), uv(&[0.8, 0.3]), uv(&[0.5, 0.9])],
            vec![0.2, 0.9, 0.4],
            GpConfig::default(),
        )
        .unwrap();
        let inc = Incumbent::from_observations(model.inputs(), model.targets()).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            maximize_acquisition(&model, &inc, &space, &mut rng, 256).unwrap()
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn pinned_coordinates_survive() {
        let space = SearchSpace::new(
            "s",
            vec![
                ParamSpec::categorical("branch", &["a", "b"]),
                ParamSpec::real("x", 0.0, 1.0, Transform::Linear).when("branch", "b"),
            ],
        )
        .unwrap();
        let model = GpModel::fit(vec![uv(&[0.75, 0.2])], vec![0.0], GpConfig::default()).unwrap();
        let inc = Incumbent::from_observations(model.inputs(), model.targets()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let search = AcquisitionSearch::with_budget(64).pin(0, 0.75);
        let c = search.maximize(&model, &inc, &space, &mut rng).unwrap();
        assert_eq!(c.x[0], 0.75);
    }
}
