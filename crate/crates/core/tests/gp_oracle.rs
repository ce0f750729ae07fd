mod common;

use common::{dense_posterior, random_points};
use hypertune::gp::{GpConfig, GpModel, Normalization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn cholesky_posterior_matches_dense_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pts = random_points(&mut rng, 12, 3);
    let y: Vec<f64> = pts.iter().map(|p| p[0] - p[1] * p[2]).collect();
    for config in [
        GpConfig::default(),
        GpConfig::raw(0.4, 1e-10),
        GpConfig { normalization: Normalization::None, ..Default::default() },
    ] {
        let model = GpModel::fit(pts.clone(), y.clone(), config).unwrap();
        for x in random_points(&mut rng, 10, 3) {
            let post = model.posterior(&x).unwrap();
            let (m, v) = dense_posterior(&model, &x);
            assert!((post.mean - m).abs() <= 1e-8, "{} vs {m}", post.mean);
            assert!((post.variance - v).abs() <= 1e-8, "{} vs {v}", post.variance);
        }
    }
}

#[test]
fn oracle_equivalence_up_to_fifty_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for t in [1usize, 5, 20, 35, 50] {
        let d = rng.random_range(3..=6);
        let pts = random_points(&mut rng, t, d);
        let y: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..1.0)).collect();
        let model = GpModel::fit(pts, y, GpConfig { jitter: 1e-6, ..Default::default() }).unwrap();
        for x in random_points(&mut rng, 10, d) {
            let post = model.posterior(&x).unwrap();
            let (m, v) = dense_posterior(&model, &x);
            assert!((post.mean - m).abs() <= 1e-8, "t={t}: {} vs {m}", post.mean);
            assert!((post.variance - v).abs() <= 1e-8);
        }
    }
}
