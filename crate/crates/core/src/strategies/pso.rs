use rand::Rng;

use super::StrategyConfig;
use crate::space::UnitVector;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Personal best position and score.
    pub best: Option<(Vec<f64>, f64)>,
}

/// Particle swarm in unit coordinates, advanced one particle per suggestion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SwarmState {
    pub particles: Vec<Particle>,
    pub global_best: Option<(Vec<f64>, f64)>,
    /// Number of suggestions handed out so far.
    pub suggestions: usize,
}

impl SwarmState {
    fn initialize<R: Rng + ?Sized>(&mut self, size: usize, dim: usize, rng: &mut R) {
        self.particles = (0..size)
            .map(|_| {
                let position: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                let velocity = position.iter().map(|x| rng.random::<f64>() - x).collect();
                Particle {
                    position,
                    velocity,
                    best: None,
                }
            })
            .collect();
    }

    /// Applies one velocity and position update to particle `i`.
    ///
    /// Draws `r1` then `r2` for each coordinate in order.
    pub fn step<R: Rng + ?Sized>(&mut self, config: &StrategyConfig, i: usize, rng: &mut R) {
        let global = self.global_best.as_ref().map(|(g, _)| g.clone());
        let p = &mut self.particles[i];
        for j in 0..p.position.len() {
            let x = p.position[j];
            let pbest = p.best.as_ref().map_or(x, |(b, _)| b[j]);
            let gbest = global.as_ref().map_or(x, |g| g[j]);
            let r1 = rng.random::<f64>();
            let r2 = rng.random::<f64>();
            let mut v = config.inertia * p.velocity[j]
                + config.cognitive * r1 * (pbest - x)
                + config.social * r2 * (gbest - x);
            let mut next = x + v;
            if !(0.0..=1.0).contains(&next) {
                next = next.clamp(0.0, 1.0);
                v = 0.0;
            }
            p.position[j] = next;
            p.velocity[j] = v;
        }
    }

    /// Returns the particle to evaluate next together with its position.
    pub(super) fn advance<R: Rng + ?Sized>(
        &mut self,
        config: &StrategyConfig,
        dim: usize,
        rng: &mut R,
    ) -> (usize, UnitVector) {
        if self.particles.is_empty() {
            self.initialize(config.swarm_size, dim, rng);
        }
        let i = self.suggestions % self.particles.len();
        if self.suggestions >= self.particles.len() {
            self.step(config, i, rng);
        }
        self.suggestions += 1;
        (i, UnitVector::clamped(self.particles[i].position.clone()))
    }

    /// Records the score of particle `i` at its current position.
    pub(super) fn record(&mut self, i: usize, score: f64) {
        let p = &mut self.particles[i];
        if p.best.as_ref().is_none_or(|(_, b)| score > *b) {
            p.best = Some((p.position.clone(), score));
        }
        if self.global_best.as_ref().is_none_or(|(_, g)| score > *g) {
            self.global_best = Some((p.position.clone(), score));
        }
    }
}
