//! Gaussian-process surrogate with a squared-exponential kernel.
//!
//! The model is a zero-mean GP over [`UnitVector`]s with covariance
//! `k(a, b) = exp(-|a - b|^2 / beta)`. Fitting factors `K + jitter * I` with a
//! Cholesky decomposition; if the factorization fails the jitter is raised
//! tenfold until [`MAX_JITTER`]. Targets are normalized before fitting
//! (by default standardized) and posterior moments are reported back in the
//! original units.

use thiserror::Error;

use crate::space::UnitVector;

pub const DEFAULT_JITTER: f64 = 1e-10;
pub const MAX_JITTER: f64 = 1e-4;
const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("cannot fit a GP on zero observations")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("{inputs} inputs but {targets} targets")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("target {0} is not finite")]
    NonFiniteTarget(usize),
    #[error("invalid GP configuration: {0}")]
    InvalidConfig(String),
    #[error("covariance matrix is not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaMode {
    Fixed,
    /// Median of pairwise squared distances between inputs (1 when that median is 0).
    MedianHeuristic,
}

/// Affine map applied to targets before fitting: `(y - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    None,
    /// Sample mean and standard deviation (floored at 1e-12) of the targets.
    Standardize,
    Fixed { offset: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpConfig {
    pub beta: f64,
    pub jitter: f64,
    pub beta_mode: BetaMode,
    pub normalization: Normalization,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            beta: 1.0,
            jitter: DEFAULT_JITTER,
            beta_mode: BetaMode::MedianHeuristic,
            normalization: Normalization::Standardize,
        }
    }
}

impl GpConfig {
    /// Fixed kernel scale, no target normalization.
    pub fn raw(beta: f64, jitter: f64) -> Self {
        GpConfig {
            beta,
            jitter,
            beta_mode: BetaMode::Fixed,
            normalization: Normalization::None,
        }
    }

    fn validate(&self) -> Result<(), GpError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(GpError::InvalidConfig(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.jitter > 0.0 && self.jitter.is_finite()) {
            return Err(GpError::InvalidConfig(format!(
                "jitter must be > 0, got {}",
                self.jitter
            )));
        }
        if let Normalization::Fixed { offset, scale } = self.normalization {
            if !offset.is_finite() || !(scale > 0.0 && scale.is_finite()) {
                return Err(GpError::InvalidConfig(format!(
                    "fixed normalization needs finite offset and positive scale, got ({offset}, {scale})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
}

impl Posterior {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Squared-exponential covariance between two points.
pub fn kernel(a: &UnitVector, b: &UnitVector, beta: f64) -> Result<f64, GpError> {
    if a.len() != b.len() {
        return Err(GpError::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(se_kernel(a, b, beta))
}

fn se_kernel(a: &UnitVector, b: &UnitVector, beta: f64) -> f64 {
    (-a.squared_distance(b) / beta).exp()
}

/// Median of the pairwise squared distances, falling back to 1.
pub fn median_heuristic(inputs: &[UnitVector]) -> f64 {
    let mut d: Vec<f64> = inputs
        .iter()
        .enumerate()
        .flat_map(|(i, a)| inputs[i + 1..].iter().map(move |b| a.squared_distance(b)))
        .collect();
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let median = if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

/// Dense lower-triangular factor stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors a symmetric matrix given row-major; `None` when it is not positive definite.
    pub fn factor(a: &[f64], n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let dot: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
                let s = a[i * n + j] - dot;
                if i == j {
                    if !s.is_finite() || s <= 0.0 {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Cholesky { n, l })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let dot: f64 = (0..i).map(|k| self.l[i * n + k] * y[k]).sum();
            y[i] = (y[i] - dot) / self.l[i * n + i];
        }
        y
    }

    /// Solves `L^T x = y`.
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let dot: f64 = (i + 1..n).map(|k| self.l[k * n + i] * x[k]).sum();
            x[i] = (x[i] - dot) / self.l[i * n + i];
        }
        x
    }

    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }
}

#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<UnitVector>,
    targets: Vec<f64>,
    offset: f64,
    scale: f64,
    beta: f64,
    jitter: f64,
    chol: Cholesky,
    alpha: Vec<f64>,
    config: GpConfig,
}

impl GpModel {
    pub fn fit(inputs: Vec<UnitVector>, targets: Vec<f64>, config: GpConfig) -> Result<Self, GpError> {
        config.validate()?;
        if inputs.is_empty() {
            return Err(GpError::Empty);
        }
        if inputs.len() != targets.len() {
            return Err(GpError::LengthMismatch {
                inputs: inputs.len(),
                targets: targets.len(),
            });
        }
        let d = inputs[0].len();
        if let Some(bad) = inputs.iter().find(|x| x.len() != d) {
            return Err(GpError::Dimension {
                expected: d,
                got: bad.len(),
            });
        }
        if let Some(i) = targets.iter().position(|y| !y.is_finite()) {
            return Err(GpError::NonFiniteTarget(i));
        }

        let n = inputs.len();
        let (offset, scale) = match config.normalization {
            Normalization::None => (0.0, 1.0),
            Normalization::Fixed { offset, scale } => (offset, scale),
            Normalization::Standardize => {
                let mean = targets.iter().sum::<f64>() / n as f64;
                let var = targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
                (mean, var.sqrt().max(STD_FLOOR))
            }
        };
        let beta = match config.beta_mode {
            BetaMode::Fixed => config.beta,
            BetaMode::MedianHeuristic => median_heuristic(&inputs),
        };

        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            gram[i * n + i] = 1.0;
            for j in 0..i {
                let k = se_kernel(&inputs[i], &inputs[j], beta);
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
        }

        let mut jitter = config.jitter;
        let chol = loop {
            let mut a = gram.clone();
            for i in 0..n {
                a[i * n + i] += jitter;
            }
            if let Some(c) = Cholesky::factor(&a, n) {
                break c;
            }
            if jitter >= MAX_JITTER {
                return Err(GpError::NotPositiveDefinite { jitter });
            }
            jitter = (jitter * 10.0).min(MAX_JITTER.max(config.jitter));
        };

        let normalized: Vec<f64> = targets.iter().map(|y| (y - offset) / scale).collect();
        let alpha = chol.solve(&normalized);
        Ok(GpModel {
            inputs,
            targets,
            offset,
            scale,
            beta,
            jitter,
            chol,
            alpha,
            config,
        })
    }

    pub fn posterior(&self, x: &UnitVector) -> Result<Posterior, GpError> {
        let d = self.dim();
        if x.len() != d {
            return Err(GpError::Dimension {
                expected: d,
                got: x.len(),
            });
        }
        let k: Vec<f64> = self
            .inputs
            .iter()
            .map(|xi| se_kernel(x, xi, self.beta))
            .collect();
        let mean: f64 = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = self.chol.solve_lower(&k);
        let variance = (1.0 - v.iter().map(|x| x * x).sum::<f64>()).clamp(0.0, 1.0);
        Ok(Posterior {
            mean: self.offset + self.scale * mean,
            variance: self.scale * self.scale * variance,
        })
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[UnitVector] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Kernel scale actually used (after the median heuristic, if enabled).
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Diagonal stabilizer actually used (after escalation).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `(offset, scale)` of the target normalization.
    pub fn normalization(&self) -> (f64, f64) {
        (self.offset, self.scale)
    }

    pub fn chol(&self) -> &Cholesky {
        &self.chol
    }

    /// `(K + jitter I)^-1` applied to the normalized targets.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn config(&self) -> &GpConfig {
        &self.config
    }
}
