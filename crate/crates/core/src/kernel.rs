//! Mollifiers `K_ε(x) = ε^{-d} K(x / ε)` and their gradients.

use std::f64::consts::PI;

use crate::error::{check_dim, domain, Error, Result};
use crate::gauss;

/// Base kernel shapes. Only the Gaussian product density is built in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseKernel {
    /// `K = φ^{⊗d}`, the standard normal density on `R^d`.
    Gaussian,
}

impl BaseKernel {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "gaussian" => Ok(BaseKernel::Gaussian),
            other => Err(Error::Config(format!("unknown kernel '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaseKernel::Gaussian => "gaussian",
        }
    }
}

/// Norms and Lipschitz constants of the base kernel `K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConstants {
    /// `L_K = sup |∇K|`.
    pub lipschitz_k: f64,
    /// `L_{∇K} = sup ‖∇²K‖_op`.
    pub lipschitz_grad_k: f64,
    /// `‖K‖_∞`.
    pub sup_k: f64,
    /// `‖∇K‖_∞`.
    pub sup_grad_k: f64,
}

/// Maximum of a one-dimensional profile on `[0, r_max]`: grid scan, then golden-section refinement.
fn profile_sup(f: impl Fn(f64) -> f64, r_max: f64) -> f64 {
    const CELLS: usize = 20_000;
    let h = r_max / CELLS as f64;
    let (i_best, mut best) =
        (0..=CELLS)
            .map(|i| (i, f(i as f64 * h)))
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let (mut a, mut b) = ((i_best as f64 - 1.0).max(0.0) * h, ((i_best + 1) as f64 * h).min(r_max));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if f(c) >= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best = best.max(f(0.5 * (a + b)));
    best
}

fn gaussian_constants(dim: usize) -> KernelConstants {
    // radial profiles of the Gaussian product density
    let c = (2.0 * PI).powf(-0.5 * dim as f64);
    let value = |r: f64| c * (-0.5 * r * r).exp();
    let grad = |r: f64| c * r * (-0.5 * r * r).exp();
    let hess = |r: f64| c * (r * r - 1.0).abs().max(1.0) * (-0.5 * r * r).exp();
    let sup_k = profile_sup(value, 12.0);
    let sup_grad_k = profile_sup(grad, 12.0);
    KernelConstants { lipschitz_k: sup_grad_k, lipschitz_grad_k: profile_sup(hess, 12.0), sup_k, sup_grad_k }
}

/// Smallest scaled radius `r ≥ 1` past which `r e^{-r²/2} ≤ τ e^{-1/2}`, i.e. `|∇K| ≤ τ ‖∇K‖_∞`.
fn gradient_truncation_radius(tolerance: f64) -> f64 {
    let g = |r: f64| r.ln() - 0.5 * r * r + 0.5 - tolerance.ln();
    let (mut lo, mut hi) = (1.0, 1.0);
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// A scaled mollifier `K_ε` on `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct MollifierKernel {
    dim: usize,
    epsilon: f64,
    base: BaseKernel,
    constants: KernelConstants,
}

impl MollifierKernel {
    pub fn new(base: BaseKernel, dim: usize, epsilon: f64) -> Result<Self> {
        if dim == 0 {
            return domain("kernel dimension must be positive");
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return domain(format!("bandwidth must be positive and finite, got {epsilon}"));
        }
        let constants = match base {
            BaseKernel::Gaussian => {
                let mass_1d = gauss::trapezoid(|x| gauss::std_normal_density(&[x]), -12.0, 12.0, 4801);
                let mass = mass_1d.powi(dim as i32);
                if (mass - 1.0).abs() > 1e-8 {
                    return Err(Error::Numerical(format!("kernel mass {mass} differs from 1")));
                }
                gaussian_constants(dim)
            }
        };
        Ok(MollifierKernel { dim, epsilon, base, constants })
    }

    pub fn gaussian(dim: usize, epsilon: f64) -> Result<Self> {
        Self::new(BaseKernel::Gaussian, dim, epsilon)
    }

    pub fn from_name(name: &str, dim: usize, epsilon: f64) -> Result<Self> {
        Self::new(BaseKernel::from_name(name)?, dim, epsilon)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn base(&self) -> BaseKernel {
        self.base
    }

    pub fn constants(&self) -> &KernelConstants {
        &self.constants
    }

    /// `K(u)`.
    pub fn base_value(&self, u: &[f64]) -> f64 {
        match self.base {
            BaseKernel::Gaussian => gauss::std_normal_density(u),
        }
    }

    /// `∇K(u)` written into `out`.
    pub fn base_gradient(&self, u: &[f64], out: &mut [f64]) {
        match self.base {
            BaseKernel::Gaussian => {
                let k = gauss::std_normal_density(u);
                for (o, ui) in out.iter_mut().zip(u) {
                    *o = -ui * k;
                }
            }
        }
    }

    fn scaled(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v / self.epsilon).collect()
    }

    /// `K_ε(x) = ε^{-d} K(x / ε)`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.base_value(&self.scaled(x)) * self.epsilon.powi(-(self.dim as i32)))
    }

    /// `∇K_ε(x) = ε^{-(d+1)} ∇K(x / ε)`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![0.0; self.dim];
        self.base_gradient(&self.scaled(x), &mut out);
        let s = self.epsilon.powi(-(self.dim as i32 + 1));
        out.iter_mut().for_each(|o| *o *= s);
        Ok(out)
    }

    /// `G^ℓ_ε(x) = ε^{-d} (∂_ℓ K)(x / ε)`, so that `∂_ℓ K_ε = G^ℓ_ε / ε`.
    pub fn component(&self, l: usize, x: &[f64]) -> Result<f64> {
        if l >= self.dim {
            return domain(format!("component {l} out of range for dimension {}", self.dim));
        }
        Ok(self.gradient(x)?[l] * self.epsilon)
    }

    /// `K_ε(0)`; for the Gaussian this is the normalising constant of the scaled kernel.
    pub fn peak(&self) -> f64 {
        self.constants.sup_k * self.epsilon.powi(-(self.dim as i32))
    }

    /// `‖K_ε‖_∞ = ‖K‖_∞ / ε^d`.
    pub fn sup_value(&self) -> f64 {
        self.peak()
    }

    /// `‖∇K_ε‖_∞ = ‖∇K‖_∞ / ε^{d+1}`.
    pub fn sup_gradient(&self) -> f64 {
        self.constants.sup_grad_k * self.epsilon.powi(-(self.dim as i32 + 1))
    }

    /// Lipschitz constant of `K_ε`: `L_K / ε^{d+1}`.
    pub fn value_lipschitz(&self) -> f64 {
        self.constants.lipschitz_k * self.epsilon.powi(-(self.dim as i32 + 1))
    }

    /// Lipschitz constant of `∇K_ε`: `L_{∇K} / ε^{d+2}`.
    pub fn gradient_lipschitz(&self) -> f64 {
        self.constants.lipschitz_grad_k * self.epsilon.powi(-(self.dim as i32 + 2))
    }

    /// Radius past which both `K_ε ≤ τ ‖K_ε‖_∞` and `|∇K_ε| ≤ τ ‖∇K_ε‖_∞`.
    pub fn truncation_radius(&self, tolerance: f64) -> Result<f64> {
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return domain(format!("tolerance must lie in (0, 1), got {tolerance}"));
        }
        let value_radius = (2.0 * (1.0 / tolerance).ln()).sqrt();
        let radius = value_radius.max(gradient_truncation_radius(tolerance));
        Ok(self.epsilon * radius)
    }
}
