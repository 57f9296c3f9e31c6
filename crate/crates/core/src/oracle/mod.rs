//! Reference solutions for the built-in problems.
//!
//! Burgers and KPZ reduce to the heat equation through the Cole–Hopf change of
//! variables, which leaves Gaussian expectations that are estimated either by
//! plain Monte Carlo or by Gauss–Hermite quadrature. Fokker–Planck with a
//! Gaussian start is solved in closed form.

pub mod quadrature;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::gauss;
use crate::simulate::particle_rng;

/// How the expectations inside the Cole–Hopf formulas are computed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleMethod {
    MonteCarlo { samples: usize, seed: u64 },
    GaussHermite { nodes: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub method: OracleMethod,
}

impl OracleConfig {
    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        OracleConfig { method: OracleMethod::MonteCarlo { samples, seed } }
    }

    pub fn gauss_hermite(nodes: usize) -> Self {
        OracleConfig { method: OracleMethod::GaussHermite { nodes } }
    }

    fn validate(&self) -> Result<()> {
        match self.method {
            OracleMethod::MonteCarlo { samples, .. } if samples < 1 => domain("oracle needs at least one sample"),
            OracleMethod::GaussHermite { nodes } if nodes < 2 => domain("quadrature needs at least two nodes"),
            _ => Ok(()),
        }
    }
}

impl Default for OracleConfig {
    /// Monte Carlo with 10 000 draws.
    fn default() -> Self {
        OracleConfig::monte_carlo(10_000, 0)
    }
}

/// A reference value with its Monte Carlo standard error (zero for quadrature and closed forms).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleValue {
    pub value: f64,
    pub std_error: f64,
}

/// `U0(x) = ∫_{-∞}^x u0`, for the standard Gaussian `u0`.
pub fn u0_cumulative(x: f64) -> f64 {
    gauss::std_normal_cdf(x)
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("time must be non-negative and finite, got {t}"));
    }
    Ok(())
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu.is_finite()) {
        return domain(format!("nu must be positive and finite, got {nu}"));
    }
    Ok(())
}

/// Weighted draws `(z, w)` representing `N(0, I_d)`: i.i.d. with `w = 1/n`, or a tensor Gauss–Hermite rule.
fn gaussian_draws(dim: usize, cfg: &OracleConfig, max_quadrature_dim: usize) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    cfg.validate()?;
    match cfg.method {
        OracleMethod::MonteCarlo { samples, seed } => {
            let mut rng = particle_rng(seed, u64::MAX);
            let z: Vec<f64> = (0..samples * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            Ok((z, vec![1.0 / samples as f64; samples], true))
        }
        OracleMethod::GaussHermite { nodes } => {
            if dim > max_quadrature_dim {
                return Err(Error::Unsupported(format!(
                    "tensor Gauss-Hermite quadrature is limited to d <= {max_quadrature_dim}, got d = {dim}"
                )));
            }
            let (x1, w1) = quadrature::standard_normal_rule(nodes)?;
            let total = nodes.pow(dim as u32);
            let mut z = Vec::with_capacity(total * dim);
            let mut w = Vec::with_capacity(total);
            for flat in 0..total {
                let mut rem = flat;
                let mut weight = 1.0;
                for _ in 0..dim {
                    let j = rem % nodes;
                    rem /= nodes;
                    z.push(x1[j]);
                    weight *= w1[j];
                }
                w.push(weight);
            }
            Ok((z, w, false))
        }
    }
}

/// Cole–Hopf ratio `E[u0(y) e^{s U0(y)/ν²}] / E[e^{s U0(y)/ν²}]`, `y = x + ν B_t`.
///
/// `sign = -1` solves `∂_t u = ν²/2 ∂_xx u - u ∂_x u`; `sign = +1` solves the
/// same equation with `+ u ∂_x u`. Exponents are shifted by their maximum before
/// exponentiating, and numerator and denominator share the same draws.
fn cole_hopf_ratio(t: f64, x: f64, nu: f64, sign: f64, cfg: &OracleConfig) -> Result<OracleValue> {
    check_time(t)?;
    check_nu(nu)?;
    if t == 0.0 {
        cfg.validate()?;
        return Ok(OracleValue { value: gauss::std_normal_density(&[x]), std_error: 0.0 });
    }
    let (z, w, random) = gaussian_draws(1, cfg, 2)?;
    let scale = nu * t.sqrt();
    let inv_nu2 = 1.0 / (nu * nu);
    let ys: Vec<f64> = z.iter().map(|z| x + scale * z).collect();
    let expo: Vec<f64> = ys.iter().map(|y| sign * u0_cumulative(*y) * inv_nu2).collect();
    let shift = expo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = expo.iter().map(|a| (a - shift).exp()).collect();
    let u: Vec<f64> = ys.iter().map(|y| gauss::std_normal_density(&[*y])).collect();
    let den: f64 = e.iter().zip(&w).map(|(e, w)| e * w).sum();
    let num: f64 = e.iter().zip(&u).zip(&w).map(|((e, u), w)| e * u * w).sum();
    if !(den > 0.0 && den.is_finite()) {
        return Err(Error::Numerical(format!("degenerate Cole-Hopf denominator at x = {x}")));
    }
    let value = num / den;
    let std_error = if random && w.len() > 1 {
        // delta method for a ratio of means
        let n = w.len() as f64;
        let mean_den = den;
        let ss: f64 = e.iter().zip(&u).map(|(e, u)| (e * u - value * e).powi(2)).sum();
        (ss / (n * (n - 1.0))).sqrt() / mean_den
    } else {
        0.0
    };
    Ok(OracleValue { value, std_error })
}

/// Burgers solution for `Φ = ν`, `g = 0`, `Λ(z) = z`, Gaussian `u0`.
///
/// With `Λ(z) = z` the particle scheme solves `∂_t u = ν²/2 ∂_xx u + u ∂_x u`,
/// so this is the `+` branch of the Cole–Hopf ratio.
pub fn burgers_reference(t: f64, x: f64, nu: f64, cfg: &OracleConfig) -> Result<OracleValue> {
    cole_hopf_ratio(t, x, nu, 1.0, cfg)
}

/// Solution of the textbook form `∂_t u = ν²/2 ∂_xx u - u ∂_x u` from the same `u0`.
pub fn viscous_burgers_reference(t: f64, x: f64, nu: f64, cfg: &OracleConfig) -> Result<OracleValue> {
    cole_hopf_ratio(t, x, nu, -1.0, cfg)
}

/// `log E[exp(u0(x + ν B_t))]` for a caller-supplied `u0`.
pub fn kpz_reference_with(
    u0: impl Fn(&[f64]) -> f64,
    t: f64,
    x: &[f64],
    nu: f64,
    cfg: &OracleConfig,
) -> Result<OracleValue> {
    check_time(t)?;
    check_nu(nu)?;
    let d = x.len();
    if d == 0 {
        return domain("empty evaluation point");
    }
    if t == 0.0 {
        cfg.validate()?;
        return Ok(OracleValue { value: u0(x), std_error: 0.0 });
    }
    let (z, w, random) = gaussian_draws(d, cfg, 2)?;
    let scale = nu * t.sqrt();
    let mut y = vec![0.0; d];
    let vals: Vec<f64> = z
        .chunks_exact(d)
        .map(|zi| {
            for j in 0..d {
                y[j] = x[j] + scale * zi[j];
            }
            u0(&y).exp()
        })
        .collect();
    let mean: f64 = vals.iter().zip(&w).map(|(v, w)| v * w).sum();
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::Numerical(format!("degenerate KPZ expectation {mean}")));
    }
    let std_error = if random && vals.len() > 1 {
        let n = vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt() / mean
    } else {
        0.0
    };
    Ok(OracleValue { value: mean.ln(), std_error })
}

/// KPZ solution with the standard Gaussian `u0`.
pub fn kpz_reference(t: f64, x: &[f64], nu: f64, cfg: &OracleConfig) -> Result<OracleValue> {
    kpz_reference_with(gauss::std_normal_density, t, x, nu, cfg)
}

/// Fokker–Planck solution from `N(0, 1)` with `Φ = ν`: the `N(0, 1 + ν² t)` density.
pub fn fokker_planck_reference(t: f64, x: f64, nu: f64) -> Result<f64> {
    check_time(t)?;
    check_nu(nu)?;
    Ok(gauss::isotropic_density(&[x], 1.0 + nu * nu * t))
}
