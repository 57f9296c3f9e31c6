//! Euler–Maruyama paths of the independent particles.
//!
//! Particle `i` draws its initial position and all of its Gaussian increments
//! from its own ChaCha stream `(seed, i)`, so a bundle is a pure function of
//! `(problem, grid, N, seed)` regardless of how the work is scheduled.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{check_dim, domain, Result};
use crate::model::{ParticleRng, Problem, TimeGrid};

/// The generator for particle `index` under run seed `seed`.
pub fn particle_rng(seed: u64, index: u64) -> ParticleRng {
    let mut rng = ParticleRng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One Euler–Maruyama step: `x + Φ(t, x) √dt · noise + g(t, x) dt`.
pub fn euler_step(x: &[f64], t: f64, dt: f64, noise: &[f64], problem: &Problem) -> Result<Vec<f64>> {
    check_dim(problem.dim(), x.len())?;
    check_dim(problem.noise_dim(), noise.len())?;
    if !(dt > 0.0) {
        return domain(format!("time step must be positive, got {dt}"));
    }
    let mut out = vec![0.0; x.len()];
    let mut drift = vec![0.0; x.len()];
    step_into(x, t, dt, noise, problem, &mut drift, &mut out);
    Ok(out)
}

fn step_into(x: &[f64], t: f64, dt: f64, noise: &[f64], problem: &Problem, drift: &mut [f64], out: &mut [f64]) {
    problem.drift().eval(t, x, drift);
    for ((o, xi), gi) in out.iter_mut().zip(x).zip(drift.iter()) {
        *o = xi + gi * dt;
    }
    problem.diffusion().apply_add(t, x, noise, dt.sqrt(), out);
}

/// Positions `ξ̄^i_{t_k}` of `N` particles on every grid time.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBundle {
    particles: usize,
    steps: usize,
    dim: usize,
    seed: u64,
    // time-major: [k][i][j]
    positions: Vec<f64>,
}

impl PathBundle {
    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// All positions at grid time `t_k`, flattened `N × d`.
    pub fn slice(&self, k: usize) -> &[f64] {
        let w = self.particles * self.dim;
        &self.positions[k * w..(k + 1) * w]
    }

    /// Position of particle `i` at `t_k`.
    pub fn position(&self, i: usize, k: usize) -> &[f64] {
        let start = (k * self.particles + i) * self.dim;
        &self.positions[start..start + self.dim]
    }
}

/// Simulates `N` independent Euler–Maruyama paths on `grid`.
pub fn simulate_paths(problem: &Problem, grid: &TimeGrid, particles: usize, seed: u64) -> Result<PathBundle> {
    if particles == 0 {
        return domain("number of particles must be positive");
    }
    let d = problem.dim();
    let p = problem.noise_dim();
    let n = grid.steps();
    let dt = grid.dt();

    let paths: Vec<Vec<f64>> = (0..particles)
        .into_par_iter()
        .map(|i| {
            let mut rng = particle_rng(seed, i as u64);
            let mut path = vec![0.0; (n + 1) * d];
            problem.sample_u0(&mut rng, &mut path[..d]);
            let mut noise = vec![0.0; p];
            let mut drift = vec![0.0; d];
            for k in 0..n {
                for w in noise.iter_mut() {
                    *w = StandardNormal.sample(&mut rng);
                }
                let (done, rest) = path.split_at_mut((k + 1) * d);
                step_into(&done[k * d..], grid.time(k), dt, &noise, problem, &mut drift, &mut rest[..d]);
            }
            path
        })
        .collect();

    let mut positions = vec![0.0; (n + 1) * particles * d];
    for (i, path) in paths.iter().enumerate() {
        for k in 0..=n {
            let dst = (k * particles + i) * d;
            positions[dst..dst + d].copy_from_slice(&path[k * d..(k + 1) * d]);
        }
    }
    Ok(PathBundle { particles, steps: n, dim: d, seed, positions })
}
