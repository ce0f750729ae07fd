//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use hypertune::gp::{kernel, GpModel};
use hypertune::space::UnitVector;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn random_points<R: Rng>(rng: &mut R, n: usize, d: usize) -> Vec<UnitVector> {
    (0..n)
        .map(|_| UnitVector::new((0..d).map(|_| rng.random::<f64>()).collect()).unwrap())
        .collect()
}

/// Posterior moments from an explicitly inverted covariance matrix:
/// mu = k^T K^-1 f and var = k(x,x) - k^T K^-1 k.
pub fn dense_posterior(model: &GpModel, x: &UnitVector) -> (f64, f64) {
    let pts = model.inputs();
    let n = pts.len();
    let beta = model.beta();
    let k_mat = DMatrix::from_fn(n, n, |i, j| {
        kernel(&pts[i], &pts[j], beta).unwrap() + if i == j { model.jitter() } else { 0.0 }
    });
    let inv = k_mat.try_inverse().expect("K + jitter I is invertible");
    let (offset, scale) = model.normalization();
    let f = DVector::from_iterator(n, model.targets().iter().map(|y| (y - offset) / scale));
    let k = DVector::from_iterator(n, pts.iter().map(|p| kernel(x, p, beta).unwrap()));
    let mean = (k.transpose() * &inv * f)[(0, 0)];
    let var = 1.0 - (k.transpose() * &inv * &k)[(0, 0)];
    (offset + scale * mean, scale * scale * var.clamp(0.0, 1.0))
}

/// Standard normal density.
pub fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Composite Simpson integral of the standard normal density over [a, b].
pub fn simpson_normal_mass(a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = phi(a) + phi(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * phi(a + i as f64 * h);
    }
    s * h / 3.0
}
