//! Small Gaussian helpers shared by the model, kernel and oracle modules.

use std::f64::consts::{PI, SQRT_2};

/// `(2π)^{-1/2}`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Density of `N(0, σ² I_d)` at `x`.
pub fn isotropic_density(x: &[f64], variance: f64) -> f64 {
    let d = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (2.0 * PI * variance).powf(-0.5 * d) * (-0.5 * r2 / variance).exp()
}

/// Density of `N(0, I_d)` at `x`.
pub fn std_normal_density(x: &[f64]) -> f64 {
    isotropic_density(x, 1.0)
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Composite trapezoid rule with `points` nodes on `[a, b]`.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, points: usize) -> f64 {
    assert!(points >= 2);
    let h = (b - a) / (points - 1) as f64;
    let inner: f64 = (1..points - 1).map(|i| f(a + i as f64 * h)).sum();
    h * (inner + 0.5 * (f(a) + f(b)))
}
