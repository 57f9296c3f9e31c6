//! PDE instances `∂_t u = L*u + u Λ(t, x, u, ∇u)` and the time grid.
//!
//! A [`Problem`] bundles the drift `g`, the diffusion `Φ`, the weighting
//! function `Λ` and the initial density `u0`. The three built-in problems are
//! the Fokker-Planck sanity case (`Λ = 0`), viscous Burgers in one dimension
//! (`Λ = z`) and the KPZ equation written in semilinear form (`Λ = |z|² / y`).

use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, domain, Error, Result};
use crate::gauss;

/// Random generator handed to initial-law samplers. One stream per particle.
pub type ParticleRng = ChaCha8Rng;

/// Default horizon of the built-in problems.
pub const DEFAULT_HORIZON: f64 = 0.1;

/// Default floor applied to `y` before KPZ's division.
pub const DEFAULT_Y_FLOOR: f64 = 1e-12;

type VectorField = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type WeightFn = Arc<dyn Fn(f64, &[f64], f64, &[f64]) -> f64 + Send + Sync>;
type Sampler = Arc<dyn Fn(&mut ParticleRng, &mut [f64]) + Send + Sync>;

/// Drift `g(t, x)`.
#[derive(Clone)]
pub enum Drift {
    Zero,
    Constant(Vec<f64>),
    /// Writes `g(t, x)` into the output slice (length `d`).
    Custom(VectorField),
}

impl Drift {
    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match self {
            Drift::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Drift::Constant(c) => out.copy_from_slice(c),
            Drift::Custom(f) => f(t, x, out),
        }
    }

    /// `sup |g|` when it is known in closed form.
    pub fn sup_norm(&self) -> Option<f64> {
        match self {
            Drift::Zero => Some(0.0),
            Drift::Constant(c) => Some(c.iter().map(|v| v * v).sum::<f64>().sqrt()),
            Drift::Custom(_) => None,
        }
    }
}

/// Diffusion coefficient `Φ(t, x)`, a `d × p` matrix.
#[derive(Clone)]
pub enum Diffusion {
    /// `ν · I_d`, so `p = d`.
    Scalar(f64),
    /// Writes the row-major `d × noise_dim` matrix into the output slice.
    Custom { noise_dim: usize, matrix: VectorField },
}

impl Diffusion {
    pub fn noise_dim(&self, dim: usize) -> usize {
        match self {
            Diffusion::Scalar(_) => dim,
            Diffusion::Custom { noise_dim, .. } => *noise_dim,
        }
    }

    /// Row-major `d × p` matrix at `(t, x)`.
    pub fn matrix(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        match self {
            Diffusion::Scalar(nu) => {
                let mut m = vec![0.0; d * d];
                for i in 0..d {
                    m[i * d + i] = *nu;
                }
                m
            }
            Diffusion::Custom { noise_dim, matrix } => {
                let mut m = vec![0.0; d * noise_dim];
                matrix(t, x, &mut m);
                m
            }
        }
    }

    /// Accumulates `scale · Φ(t, x) · noise` into `out`.
    pub fn apply_add(&self, t: f64, x: &[f64], noise: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            Diffusion::Scalar(nu) => {
                for (o, w) in out.iter_mut().zip(noise) {
                    *o += scale * nu * w;
                }
            }
            Diffusion::Custom { noise_dim, .. } => {
                let m = self.matrix(t, x);
                for (row, o) in m.chunks_exact(*noise_dim).zip(out.iter_mut()) {
                    let dot: f64 = row.iter().zip(noise).map(|(a, b)| a * b).sum();
                    *o += scale * dot;
                }
            }
        }
    }

    /// Operator-norm bound `sup |Φ|` when known in closed form.
    pub fn sup_norm(&self) -> Option<f64> {
        match self {
            Diffusion::Scalar(nu) => Some(nu.abs()),
            Diffusion::Custom { .. } => None,
        }
    }
}

/// The weighting function `Λ(t, x, y, z)` before optional clipping.
#[derive(Clone)]
pub enum Weighting {
    Zero,
    Constant(f64),
    /// `Λ = z₁` (Burgers, `d = 1`).
    Gradient,
    /// `Λ = |z|² / max(y, y_floor)` (KPZ).
    GradientSquaredOverValue,
    Custom(WeightFn),
}

impl Weighting {
    fn eval(&self, t: f64, x: &[f64], y: f64, z: &[f64], y_floor: f64) -> f64 {
        match self {
            Weighting::Zero => 0.0,
            Weighting::Constant(c) => *c,
            Weighting::Gradient => z[0],
            Weighting::GradientSquaredOverValue => {
                let z2: f64 = z.iter().map(|v| v * v).sum();
                z2 / y.max(y_floor)
            }
            Weighting::Custom(f) => f(t, x, y, z),
        }
    }
}

/// Law of the initial particle positions, with density `u0`.
#[derive(Clone)]
pub enum InitialLaw {
    /// `N(0, I_d)`.
    StandardGaussian,
    Custom {
        density: ScalarField,
        sampler: Sampler,
    },
}

/// Which built-in problem (if any) a definition was made from. Used to pick a reference solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProblemKind {
    FokkerPlanck { nu: f64 },
    Burgers { nu: f64 },
    Kpz { nu: f64 },
    Custom,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::FokkerPlanck { .. } => "fokker-planck",
            ProblemKind::Burgers { .. } => "burgers",
            ProblemKind::Kpz { .. } => "kpz",
            ProblemKind::Custom => "custom",
        }
    }
}

/// A semilinear parabolic PDE instance. Immutable once built; cheap to clone.
#[derive(Clone)]
pub struct Problem {
    kind: ProblemKind,
    dim: usize,
    horizon: f64,
    drift: Drift,
    diffusion: Diffusion,
    weighting: Weighting,
    initial: InitialLaw,
    lambda_cap: Option<f64>,
    y_floor: f64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .field("lambda_cap", &self.lambda_cap)
            .field("y_floor", &self.y_floor)
            .finish_non_exhaustive()
    }
}

impl Problem {
    /// A custom problem: zero drift, unit scalar diffusion, `Λ = 0`, Gaussian `u0`.
    /// Use the `with_*` builders to fill in the rest.
    pub fn new(dim: usize, horizon: f64) -> Result<Self> {
        if dim == 0 {
            return domain("dimension must be positive");
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return domain(format!("horizon must be positive and finite, got {horizon}"));
        }
        Ok(Problem {
            kind: ProblemKind::Custom,
            dim,
            horizon,
            drift: Drift::Zero,
            diffusion: Diffusion::Scalar(1.0),
            weighting: Weighting::Zero,
            initial: InitialLaw::StandardGaussian,
            lambda_cap: None,
            y_floor: DEFAULT_Y_FLOOR,
        })
    }

    /// Looks a built-in problem up by its CLI name.
    pub fn by_name(name: &str, dim: usize, nu: f64) -> Result<Self> {
        match name {
            "fokker-planck" => {
                if dim != 1 {
                    return Err(Error::Unsupported("fokker-planck is one-dimensional".into()));
                }
                make_fokker_planck(nu)
            }
            "burgers" => {
                if dim != 1 {
                    return Err(Error::Unsupported("burgers is one-dimensional".into()));
                }
                make_burgers(nu)
            }
            "kpz" => make_kpz(dim, nu),
            other => Err(Error::Config(format!("unknown problem '{other}'"))),
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return domain(format!("horizon must be positive and finite, got {horizon}"));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_drift(mut self, drift: Drift) -> Result<Self> {
        if let Drift::Constant(c) = &drift {
            check_dim(self.dim, c.len())?;
        }
        self.drift = drift;
        self.kind = ProblemKind::Custom;
        Ok(self)
    }

    pub fn with_diffusion(mut self, diffusion: Diffusion) -> Self {
        self.diffusion = diffusion;
        self.kind = ProblemKind::Custom;
        self
    }

    pub fn with_weighting(mut self, weighting: Weighting) -> Self {
        self.weighting = weighting;
        self.kind = ProblemKind::Custom;
        self
    }

    pub fn with_initial(mut self, initial: InitialLaw) -> Self {
        self.initial = initial;
        self.kind = ProblemKind::Custom;
        self
    }

    /// Clips every `Λ` value to `[-cap, cap]`.
    pub fn with_lambda_cap(mut self, cap: Option<f64>) -> Result<Self> {
        if let Some(c) = cap {
            if !(c > 0.0) {
                return domain(format!("lambda_cap must be positive, got {c}"));
            }
        }
        self.lambda_cap = cap;
        Ok(self)
    }

    pub fn with_y_floor(mut self, y_floor: f64) -> Result<Self> {
        if !(y_floor > 0.0) {
            return domain(format!("y_floor must be positive, got {y_floor}"));
        }
        self.y_floor = y_floor;
        Ok(self)
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn drift(&self) -> &Drift {
        &self.drift
    }

    pub fn diffusion(&self) -> &Diffusion {
        &self.diffusion
    }

    pub fn weighting(&self) -> &Weighting {
        &self.weighting
    }

    pub fn initial(&self) -> &InitialLaw {
        &self.initial
    }

    pub fn lambda_cap(&self) -> Option<f64> {
        self.lambda_cap
    }

    pub fn y_floor(&self) -> f64 {
        self.y_floor
    }

    pub fn noise_dim(&self) -> usize {
        self.diffusion.noise_dim(self.dim)
    }

    /// Effective `Λ(t, x, y, z)`, clipped when a cap is set.
    pub fn lambda(&self, t: f64, x: &[f64], y: f64, z: &[f64]) -> f64 {
        let raw = self.weighting.eval(t, x, y, z, self.y_floor);
        match self.lambda_cap {
            Some(cap) => raw.clamp(-cap, cap),
            None => raw,
        }
    }

    pub fn u0_density(&self, x: &[f64]) -> f64 {
        match &self.initial {
            InitialLaw::StandardGaussian => gauss::std_normal_density(x),
            InitialLaw::Custom { density, .. } => density(x),
        }
    }

    /// Draws one point from `u0` into `out`.
    pub fn sample_u0(&self, rng: &mut ParticleRng, out: &mut [f64]) {
        match &self.initial {
            InitialLaw::StandardGaussian => {
                for o in out.iter_mut() {
                    *o = StandardNormal.sample(rng);
                }
            }
            InitialLaw::Custom { sampler, .. } => sampler(rng, out),
        }
    }

    /// Checks the built-in initial density integrates to one.
    fn check_initial_mass(self) -> Result<Self> {
        if let InitialLaw::StandardGaussian = self.initial {
            // product density: the d-dimensional mass is the 1-d mass to the power d
            let mass_1d = gauss::trapezoid(|x| gauss::std_normal_density(&[x]), -12.0, 12.0, 4801);
            let mass = mass_1d.powi(self.dim as i32);
            if (mass - 1.0).abs() > 1e-6 {
                return Err(Error::Numerical(format!("u0 mass {mass} differs from 1")));
            }
        }
        Ok(self)
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu.is_finite()) {
        return domain(format!("nu must be positive and finite, got {nu}"));
    }
    Ok(())
}

/// `Λ = 0`: the law of `dY = ν dW` started from `N(0, 1)`.
pub fn make_fokker_planck(nu: f64) -> Result<Problem> {
    check_nu(nu)?;
    let mut p = Problem::new(1, DEFAULT_HORIZON)?;
    p.diffusion = Diffusion::Scalar(nu);
    p.kind = ProblemKind::FokkerPlanck { nu };
    p.check_initial_mass()
}

/// Viscous Burgers in `d = 1` with `Φ = ν`, `g = 0`, `Λ(t, x, y, z) = z`.
pub fn make_burgers(nu: f64) -> Result<Problem> {
    check_nu(nu)?;
    let mut p = Problem::new(1, DEFAULT_HORIZON)?;
    p.diffusion = Diffusion::Scalar(nu);
    p.weighting = Weighting::Gradient;
    p.kind = ProblemKind::Burgers { nu };
    p.check_initial_mass()
}

/// KPZ in semilinear form: `Φ = ν I`, `g = 0`, `Λ = |z|² / max(y, y_floor)`.
pub fn make_kpz(dim: usize, nu: f64) -> Result<Problem> {
    check_nu(nu)?;
    let mut p = Problem::new(dim, DEFAULT_HORIZON)?;
    p.diffusion = Diffusion::Scalar(nu);
    p.weighting = Weighting::GradientSquaredOverValue;
    p.kind = ProblemKind::Kpz { nu };
    p.check_initial_mass()
}

/// Uniform grid `0 = t_0 < … < t_n = T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    steps: usize,
    horizon: f64,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return domain("number of time steps must be positive");
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return domain(format!("horizon must be positive and finite, got {horizon}"));
        }
        Ok(TimeGrid { steps, horizon, dt: horizon / steps as f64 })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `t_k = k · dt`, with `t_n` pinned to `T`.
    pub fn time(&self, k: usize) -> f64 {
        assert!(k <= self.steps, "grid index {k} beyond {}", self.steps);
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Index `k` with `t_k ≤ s < t_{k+1}`; `n` when `s = T`.
    pub fn step_index(&self, s: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&s) {
            return domain(format!("time {s} outside [0, {}]", self.horizon));
        }
        if s == self.horizon {
            return Ok(self.steps);
        }
        let mut k = ((s / self.dt).floor() as usize).min(self.steps - 1);
        while k + 1 < self.steps && self.time(k + 1) <= s {
            k += 1;
        }
        while k > 0 && self.time(k) > s {
            k -= 1;
        }
        Ok(k)
    }

    /// The piecewise-constant projection `r(s)` onto the grid.
    pub fn r_map(&self, s: f64) -> Result<f64> {
        self.step_index(s).map(|k| self.time(k))
    }
}
