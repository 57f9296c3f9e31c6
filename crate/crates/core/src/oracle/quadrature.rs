//! Gauss–Hermite rules.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

/// Largest supported rule; beyond it the outermost nodes underflow.
pub const MAX_NODES: usize = 400;

/// `(ψ_n(z), √(2n) ψ_{n-1}(z))` for the orthonormal Hermite functions `ψ_k = h_k e^{-z²/2}`.
fn hermite_function(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = PI.powf(-0.25) * (-0.5 * z * z).exp();
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Nodes and weights for `∫ e^{-x²} f(x) dx ≈ Σ w_i f(x_i)`, nodes in decreasing order.
///
/// Roots are bracketed by a sign scan of `ψ_n` below `√(2n+1)`, then bisected and polished by Newton.
pub fn gauss_hermite(nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(2..=MAX_NODES).contains(&nodes) {
        return domain(format!("Gauss-Hermite needs 2..={MAX_NODES} nodes, got {nodes}"));
    }
    let n = nodes;
    let half = n / 2;
    let h = (0.25 / (2.0 * n as f64).sqrt()).min(0.05);
    let floor = if n.is_multiple_of(2) { 0.0 } else { 0.5 * h };
    let mut positive = Vec::with_capacity(half + 1);
    let mut a = (2.0 * n as f64 + 1.0).sqrt() + 1.0;
    let mut fa = hermite_function(n, a).0;
    while a > floor && positive.len() < half {
        let b = (a - h).max(floor);
        let fb = hermite_function(n, b).0;
        if fa == 0.0 || (fa < 0.0) != (fb < 0.0) {
            let (mut l, mut r, mut fl) = (b, a, fb);
            for _ in 0..200 {
                let mid = 0.5 * (l + r);
                let fm = hermite_function(n, mid).0;
                if (fm < 0.0) == (fl < 0.0) {
                    l = mid;
                    fl = fm;
                } else {
                    r = mid;
                }
                if r - l <= 1e-15 * l.abs().max(1.0) {
                    break;
                }
            }
            let mut z = 0.5 * (l + r);
            for _ in 0..3 {
                let (p, dp) = hermite_function(n, z);
                if dp != 0.0 {
                    z -= p / dp;
                }
            }
            positive.push(z);
        }
        a = b;
        fa = fb;
    }
    if positive.len() != half {
        return Err(Error::Numerical(format!("found {} of {half} Gauss-Hermite roots", positive.len())));
    }
    if n % 2 == 1 {
        positive.push(0.0);
    }
    let weight = |z: f64| {
        let dp = hermite_function(n, z).1;
        2.0 * (-z * z).exp() / (dp * dp)
    };
    let mut x = positive.clone();
    x.extend(positive[..half].iter().rev().map(|z| -z));
    let w = x.iter().map(|&z| weight(z.abs())).collect();
    Ok((x, w))
}

/// Rule for `E[f(Z)]` with `Z ~ N(0, 1)`: nodes `√2 x_i`, weights `w_i / √π`.
pub fn standard_normal_rule(nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, w) = gauss_hermite(nodes)?;
    let s = PI.sqrt();
    Ok((x.into_iter().map(|v| v * std::f64::consts::SQRT_2).collect(), w.into_iter().map(|v| v / s).collect()))
}
