//! The explicit weighted-particle scheme.
//!
//! Initialization sets `G^i_0 = 1` and `ū_{t_0} = K_ε ∗ u0`. Each iteration
//! moves the particles by one Euler step, multiplies every weight by
//! `exp(Λ(t_k, ξ^i_{t_k}, ū_{t_k}(ξ^i_{t_k}), ∇ū_{t_k}(ξ^i_{t_k})) δt)` and forms
//! `ū_{t_{k+1}} = (1/N) Σ_i G^i_{k+1} K_ε(· - ξ^i_{t_{k+1}})`. Nothing is solved
//! implicitly: step `k + 1` only reads quantities fixed at step `k`.

use rayon::prelude::*;

use crate::error::{check_dim, Result};
use crate::estimator::{DensityEstimate, DensityField, EvalMode, Evaluation, ParticleEnsemble};
use crate::gauss;
use crate::kernel::{BaseKernel, MollifierKernel};
use crate::model::{InitialLaw, Problem, TimeGrid, Weighting};
use crate::simulate::{simulate_paths, PathBundle};

/// `K_ε ∗ u0`, the density used at `t_0`.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum InitialEstimate {
    /// Gaussian `u0` convolved with a Gaussian kernel: the `N(0, (1 + ε²) I)` density.
    Gaussian { dim: usize, variance: f64 },
    /// Unit-weight kernel estimate over the initial particles, for other `u0`.
    Particles(DensityEstimate),
}

impl DensityField for InitialEstimate {
    fn dim(&self) -> usize {
        match self {
            InitialEstimate::Gaussian { dim, .. } => *dim,
            InitialEstimate::Particles(est) => est.ensemble().dim(),
        }
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        match self {
            InitialEstimate::Gaussian { dim, variance } => {
                check_dim(*dim, x.len())?;
                let value = gauss::isotropic_density(x, *variance);
                let gradient = x.iter().map(|xi| -xi / variance * value).collect();
                Ok(Evaluation { value, gradient })
            }
            InitialEstimate::Particles(est) => est.evaluate(x),
        }
    }
}

/// Builds `K_ε ∗ u0`. `initial_positions` (flattened `N × d`) are only used when no closed form exists.
pub fn init_estimate(
    problem: &Problem,
    kernel: &MollifierKernel,
    initial_positions: &[f64],
    mode: EvalMode,
) -> Result<InitialEstimate> {
    check_dim(problem.dim(), kernel.dim())?;
    match (problem.initial(), kernel.base()) {
        (InitialLaw::StandardGaussian, BaseKernel::Gaussian) => {
            Ok(InitialEstimate::Gaussian { dim: problem.dim(), variance: 1.0 + kernel.epsilon() * kernel.epsilon() })
        }
        _ => {
            let ens = ParticleEnsemble::unweighted(problem.dim(), initial_positions.to_vec())?;
            Ok(InitialEstimate::Particles(DensityEstimate::new(ens, kernel.clone(), mode)?))
        }
    }
}

/// `G · exp(λ δt)`.
pub fn weight_step(weight: f64, lambda: f64, dt: f64) -> f64 {
    weight * (lambda * dt).exp()
}

/// `V̄ = exp(δt Σ_k λ_k)` for `Λ` sampled at `t_0, …, t_{k-1}` along one path.
pub fn path_weight(lambda_samples: &[f64], dt: f64) -> f64 {
    (dt * lambda_samples.iter().sum::<f64>()).exp()
}

impl Weighting {
    /// Whether `Λ` reads the density value or gradient at all.
    fn reads_density(&self) -> bool {
        !matches!(self, Weighting::Zero | Weighting::Constant(_))
    }
}

/// Evaluates a field at every point of a flattened slice, in parallel.
pub fn evaluate_field(field: &dyn DensityField, xs: &[f64]) -> Result<Vec<Evaluation>> {
    let d = field.dim();
    xs.par_chunks_exact(d).map(|x| field.evaluate(x)).collect()
}

/// Everything produced by one run of the scheme.
#[derive(Clone, Debug)]
pub struct SchemeState {
    grid: TimeGrid,
    bundle: PathBundle,
    // [k][i], k = 0..=n
    weights: Vec<Vec<f64>>,
    // [k][i], k = 0..n
    lambdas: Vec<Vec<f64>>,
    initial: InitialEstimate,
    // ū_{t_k} for k = 1..=n
    estimates: Vec<DensityEstimate>,
}

impl SchemeState {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn bundle(&self) -> &PathBundle {
        &self.bundle
    }

    /// `G^i_k` for all `i`.
    pub fn weights(&self, k: usize) -> &[f64] {
        &self.weights[k]
    }

    /// `Λ` values used in the update from `t_k` to `t_{k+1}`.
    pub fn lambda_samples(&self, k: usize) -> &[f64] {
        &self.lambdas[k]
    }

    /// `Λ` values seen by particle `i` over its first `k` steps.
    pub fn particle_lambdas(&self, i: usize, k: usize) -> Vec<f64> {
        self.lambdas[..k].iter().map(|l| l[i]).collect()
    }

    pub fn initial_estimate(&self) -> &InitialEstimate {
        &self.initial
    }

    /// Particle estimate at `t_k`, `k ≥ 1`.
    pub fn estimate(&self, k: usize) -> &DensityEstimate {
        assert!(k >= 1, "the t_0 density is the initial estimate");
        &self.estimates[k - 1]
    }

    /// `ū_{t_k}` as a queryable field, including `k = 0`.
    pub fn field(&self, k: usize) -> &dyn DensityField {
        if k == 0 {
            &self.initial
        } else {
            &self.estimates[k - 1]
        }
    }

    pub fn final_estimate(&self) -> &DensityEstimate {
        self.estimates.last().expect("grid has at least one step")
    }
}

/// Runs Initialization and the `n` Iterations with `N` particles.
pub fn run_scheme(
    problem: &Problem,
    grid: &TimeGrid,
    kernel: &MollifierKernel,
    particles: usize,
    seed: u64,
    mode: EvalMode,
) -> Result<SchemeState> {
    check_dim(problem.dim(), kernel.dim())?;
    let d = problem.dim();
    let bundle = simulate_paths(problem, grid, particles, seed)?;
    let initial = init_estimate(problem, kernel, bundle.slice(0), mode)?;
    let dt = grid.dt();
    let reads_density = problem.weighting().reads_density();
    let origin = vec![0.0; d];

    let mut weights = vec![vec![1.0; particles]];
    let mut lambdas = Vec::with_capacity(grid.steps());
    let mut estimates: Vec<DensityEstimate> = Vec::with_capacity(grid.steps());
    for k in 0..grid.steps() {
        let t = grid.time(k);
        let positions = bundle.slice(k);
        let lambda: Vec<f64> = if reads_density {
            let evals = match estimates.last() {
                Some(est) => est.evaluate_batch(positions)?,
                None => evaluate_field(&initial, positions)?,
            };
            positions
                .par_chunks_exact(d)
                .zip(evals.par_iter())
                .map(|(x, e)| problem.lambda(t, x, e.value, &e.gradient))
                .collect()
        } else {
            positions.chunks_exact(d).map(|x| problem.lambda(t, x, 0.0, &origin)).collect()
        };
        let next: Vec<f64> = weights[k].iter().zip(&lambda).map(|(g, l)| weight_step(*g, *l, dt)).collect();
        let ensemble = ParticleEnsemble::new(d, bundle.slice(k + 1).to_vec(), next.clone())?;
        estimates.push(DensityEstimate::new(ensemble, kernel.clone(), mode)?);
        weights.push(next);
        lambdas.push(lambda);
    }
    Ok(SchemeState { grid: *grid, bundle, weights, lambdas, initial, estimates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_burgers, make_fokker_planck, make_kpz};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_initial_estimate() {
        let p = make_fokker_planck(0.1).unwrap();
        let k = MollifierKernel::gaussian(1, 0.3).unwrap();
        let init = init_estimate(&p, &k, &[], EvalMode::Naive).unwrap();
        let e = init.evaluate(&[0.0]).unwrap();
        // (2π · 1.09)^{-1/2}
        assert_relative_eq!(e.value, 0.382_117_402_454_559_2, max_relative = 1e-12);
        assert_eq!(e.gradient, vec![0.0]);

        let narrow = MollifierKernel::gaussian(1, 1e-4).unwrap();
        let v = init_estimate(&p, &narrow, &[], EvalMode::Naive).unwrap().evaluate(&[0.0]).unwrap().value;
        assert!((v - p.u0_density(&[0.0])).abs() < 1e-6);
    }

    #[test]
    fn closed_form_matches_quadrature_of_the_convolution() {
        let p = make_fokker_planck(0.1).unwrap();
        let k = MollifierKernel::gaussian(1, 0.4).unwrap();
        let init = init_estimate(&p, &k, &[], EvalMode::Naive).unwrap();
        for x in [-1.3, 0.0, 0.45, 2.2] {
            let conv = gauss::trapezoid(|y| k.value(&[x - y]).unwrap() * p.u0_density(&[y]), -14.0, 14.0, 20_001);
            assert_relative_eq!(init.evaluate(&[x]).unwrap().value, conv, max_relative = 1e-10);
        }
    }

    #[test]
    fn weight_update_examples() {
        assert_eq!(weight_step(1.7, 0.0, 0.01), 1.7);
        assert_relative_eq!(weight_step(1.0, 2.0, 0.01), 1.020_201_340_026_755_8, max_relative = 1e-15);
        let mut g = 1.0;
        for _ in 0..10 {
            g = weight_step(g, 1.5, 0.01);
        }
        assert_relative_eq!(g, (1.5f64 * 10.0 * 0.01).exp(), max_relative = 1e-14);

        assert_eq!(path_weight(&[], 0.01), 1.0);
        assert_relative_eq!(path_weight(&[2.0], 0.01), 1.020_201_340_026_755_8, max_relative = 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let lams: Vec<f64> = (0..25).map(|_| rng.random_range(-3.0..3.0)).collect();
        let iterated = lams.iter().fold(1.0, |g, l| weight_step(g, *l, 0.004));
        assert_relative_eq!(path_weight(&lams, 0.004), iterated, max_relative = 1e-12);
    }

    #[test]
    fn zero_weighting_keeps_unit_weights() {
        let p = make_fokker_planck(0.1).unwrap();
        let g = TimeGrid::new(0.1, 10).unwrap();
        let k = MollifierKernel::gaussian(1, 0.2).unwrap();
        let s = run_scheme(&p, &g, &k, 500, 1, EvalMode::Naive).unwrap();
        for step in 0..=10 {
            assert!(s.weights(step).iter().all(|w| *w == 1.0));
        }
        let plain = DensityEstimate::new(
            ParticleEnsemble::unweighted(1, s.bundle().slice(10).to_vec()).unwrap(),
            k,
            EvalMode::Naive,
        )
        .unwrap();
        for x in [-0.5, 0.0, 0.8] {
            assert_eq!(s.final_estimate().evaluate(&[x]).unwrap(), plain.evaluate(&[x]).unwrap());
        }
    }

    #[test]
    fn constant_weighting_mass() {
        let p = make_fokker_planck(0.1).unwrap().with_weighting(Weighting::Constant(1.0));
        let g = TimeGrid::new(0.1, 10).unwrap();
        let k = MollifierKernel::gaussian(1, 0.2).unwrap();
        let s = run_scheme(&p, &g, &k, 200, 2, EvalMode::Naive).unwrap();
        assert_relative_eq!(s.final_estimate().total_mass(), 1.105_170_918_075_647_7, max_relative = 1e-9);
    }

    #[test]
    fn weights_follow_the_update_rule() {
        let p = make_burgers(0.1).unwrap();
        let g = TimeGrid::new(0.1, 10).unwrap();
        let k = MollifierKernel::gaussian(1, 0.3).unwrap();
        let s = run_scheme(&p, &g, &k, 300, 3, EvalMode::default()).unwrap();
        assert!(s.weights(0).iter().all(|w| *w == 1.0));
        for step in 0..10 {
            let field = s.field(step);
            for i in (0..300).step_by(37) {
                let x = s.bundle().position(i, step);
                let e = field.evaluate(x).unwrap();
                let lam = p.lambda(g.time(step), x, e.value, &e.gradient);
                let ratio = s.weights(step + 1)[i] / s.weights(step)[i];
                assert_relative_eq!(ratio, (lam * g.dt()).exp(), max_relative = 1e-12);
            }
        }
        for step in 0..=10 {
            for i in 0..300 {
                assert_relative_eq!(
                    s.weights(step)[i],
                    path_weight(&s.particle_lambdas(i, step), g.dt()),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn capped_weights_stay_below_exponential_bound() {
        let cap = 1.0;
        let p = make_burgers(0.1).unwrap().with_lambda_cap(Some(cap)).unwrap();
        let g = TimeGrid::new(0.1, 10).unwrap();
        let k = MollifierKernel::gaussian(1, 0.05).unwrap();
        let s = run_scheme(&p, &g, &k, 400, 4, EvalMode::Naive).unwrap();
        let bound = (cap * 0.1f64).exp() * (1.0 + 1e-12);
        for step in 0..=10 {
            assert!(s.weights(step).iter().all(|w| *w > 0.0 && *w <= bound));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let p = make_kpz(2, 0.1).unwrap().with_lambda_cap(Some(1e3)).unwrap();
        let g = TimeGrid::new(0.1, 4).unwrap();
        let k = MollifierKernel::gaussian(2, 0.4).unwrap();
        let a = run_scheme(&p, &g, &k, 300, 9, EvalMode::default()).unwrap();
        let b = run_scheme(&p, &g, &k, 300, 9, EvalMode::default()).unwrap();
        for step in 0..=4 {
            assert_eq!(a.weights(step), b.weights(step));
        }
    }

    #[test]
    fn scheme_is_explicit_in_time() {
        use std::sync::Arc;
        let base = make_burgers(0.1).unwrap();
        let late =
            base.clone().with_weighting(Weighting::Custom(Arc::new(
                |t, _x, _y, z| {
                    if t >= 0.05 - 1e-12 {
                        100.0
                    } else {
                        z[0]
                    }
                },
            )));
        let g = TimeGrid::new(0.1, 4).unwrap();
        let k = MollifierKernel::gaussian(1, 0.3).unwrap();
        let a = run_scheme(&base, &g, &k, 400, 2, EvalMode::Naive).unwrap();
        let b = run_scheme(&late, &g, &k, 400, 2, EvalMode::Naive).unwrap();
        // Λ at t_2 first enters G_3; everything before it is oblivious to the change
        for step in 0..=2 {
            assert_eq!(a.weights(step), b.weights(step));
        }
        assert_ne!(a.weights(3), b.weights(3));
        assert_eq!(a.estimate(2).evaluate(&[0.1]).unwrap(), b.estimate(2).evaluate(&[0.1]).unwrap());
    }

    proptest::proptest! {
        #[test]
        fn weight_recursion_is_lipschitz_in_its_inputs(
            ys in proptest::collection::vec(-3.0f64..3.0, 1..40),
            shifts in proptest::collection::vec(-1.0f64..1.0, 40),
            eta in 0.0f64..0.5,
            lip in 0.1f64..5.0,
            cap in 0.1f64..3.0,
        ) {
            let dt = 0.1 / ys.len() as f64;
            let lambda = |y: f64| (lip * y.sin()).clamp(-cap, cap);
            let (mut g, mut h) = (1.0, 1.0);
            for (k, (y, s)) in ys.iter().zip(&shifts).enumerate() {
                g = weight_step(g, lambda(*y), dt);
                h = weight_step(h, lambda(y + eta * s), dt);
                let bound = lip * (0.1 * cap).exp() * ((k + 1) as f64 * dt) * eta * (1.0 + 1e-9);
                proptest::prop_assert!((g - h).abs() <= bound + 1e-15, "k={} |G-G'|={} bound={}", k, (g - h).abs(), bound);
            }
        }
    }

    #[test]
    fn custom_initial_law_uses_particle_estimate() {
        use crate::model::InitialLaw;
        use rand_distr::{Distribution, Uniform};
        use std::sync::Arc;
        let uniform = InitialLaw::Custom {
            density: Arc::new(|x: &[f64]| if x[0].abs() <= 1.0 { 0.5 } else { 0.0 }),
            sampler: Arc::new(|rng, out: &mut [f64]| out[0] = Uniform::new(-1.0, 1.0).unwrap().sample(rng)),
        };
        let p = Problem::new(1, 0.1).unwrap().with_initial(uniform).with_weighting(Weighting::Gradient);
        let k = MollifierKernel::gaussian(1, 0.2).unwrap();
        let g = TimeGrid::new(0.1, 2).unwrap();
        let s = run_scheme(&p, &g, &k, 200, 1, EvalMode::Naive).unwrap();
        assert!(matches!(s.initial_estimate(), InitialEstimate::Particles(_)));
        let plain = DensityEstimate::new(
            ParticleEnsemble::unweighted(1, s.bundle().slice(0).to_vec()).unwrap(),
            k,
            EvalMode::Naive,
        )
        .unwrap();
        assert_eq!(s.field(0).evaluate(&[0.3]).unwrap(), plain.evaluate(&[0.3]).unwrap());
    }
}
