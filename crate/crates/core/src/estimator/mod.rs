//! Weighted kernel density estimates `ū(x) = (1/N) Σ_i G^i K_ε(x - ξ^i)` and `∇ū`.

mod tree;

use rayon::prelude::*;

use crate::error::{check_dim, domain, Result};
use crate::kernel::{BaseKernel, MollifierKernel};
use tree::KdTree;

/// Default truncation tolerance of the tree evaluator.
pub const DEFAULT_TREE_TOLERANCE: f64 = 1e-8;

/// A value and gradient pair returned by density queries.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Anything that can be queried for `(u(x), ∇u(x))`.
pub trait DensityField: Send + Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> Result<Evaluation>;
}

/// Positions `ξ^i` and multiplicative weights `G^i` of a particle slice.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl ParticleEnsemble {
    /// `points` is flattened `N × d`. Weights must be positive and finite.
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return domain("ensemble dimension must be positive");
        }
        check_dim(weights.len() * dim, points.len())?;
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return domain(format!("particle weights must be positive and finite, got {w}"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return domain("particle positions must be finite");
        }
        Ok(ParticleEnsemble { dim, points, weights })
    }

    /// Unit weights.
    pub fn unweighted(dim: usize, points: Vec<f64>) -> Result<Self> {
        let n = points.len().checked_div(dim).unwrap_or(0);
        Self::new(dim, points, vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_weight(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.weights.iter().sum::<f64>() / self.len() as f64
    }

    /// Concatenation of two ensembles.
    pub fn merge(&self, other: &ParticleEnsemble) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let mut weights = self.weights.clone();
        weights.extend_from_slice(&other.weights);
        Ok(ParticleEnsemble { dim: self.dim, points, weights })
    }
}

/// How kernel sums are computed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EvalMode {
    Naive,
    /// Skip sources past the radius where the kernel and its gradient fall below `tolerance`
    /// times their sup norms.
    Tree {
        tolerance: f64,
    },
}

impl Default for EvalMode {
    fn default() -> Self {
        EvalMode::Tree { tolerance: DEFAULT_TREE_TOLERANCE }
    }
}

/// `K_ε ∗ γ` for a weighted particle slice `γ`.
#[derive(Clone, Debug)]
pub struct DensityEstimate {
    ensemble: ParticleEnsemble,
    kernel: MollifierKernel,
    mode: EvalMode,
    tree: Option<KdTree>,
}

impl DensityEstimate {
    pub fn new(ensemble: ParticleEnsemble, kernel: MollifierKernel, mode: EvalMode) -> Result<Self> {
        check_dim(kernel.dim(), ensemble.dim())?;
        let tree = match mode {
            EvalMode::Naive => None,
            EvalMode::Tree { tolerance } => {
                let radius = kernel.truncation_radius(tolerance)? / kernel.epsilon();
                let inv = 1.0 / kernel.epsilon();
                let scaled: Vec<f64> = ensemble.points.iter().map(|p| p * inv).collect();
                Some(KdTree::build(ensemble.dim, &scaled, &ensemble.weights, radius, tolerance))
            }
        };
        Ok(DensityEstimate { ensemble, kernel, mode, tree })
    }

    pub fn ensemble(&self) -> &ParticleEnsemble {
        &self.ensemble
    }

    pub fn kernel(&self) -> &MollifierKernel {
        &self.kernel
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        if self.ensemble.is_empty() {
            return domain("cannot evaluate an empty ensemble");
        }
        check_dim(self.ensemble.dim, x.len())
    }

    fn finish(&self, value_acc: f64, mut grad_acc: Vec<f64>) -> Evaluation {
        let n = self.ensemble.len() as f64;
        let scale = self.kernel.peak() / n;
        let grad_scale = -scale / self.kernel.epsilon();
        grad_acc.iter_mut().for_each(|g| *g *= grad_scale);
        Evaluation { value: value_acc * scale, gradient: grad_acc }
    }

    fn naive_unchecked(&self, x: &[f64]) -> Evaluation {
        let d = self.ensemble.dim;
        let inv = 1.0 / self.kernel.epsilon();
        let mut grad_acc = vec![0.0; d];
        let mut value_acc = 0.0;
        match self.kernel.base() {
            BaseKernel::Gaussian => {
                let mut u = vec![0.0; d];
                for (xi, w) in self.ensemble.points.chunks_exact(d).zip(&self.ensemble.weights) {
                    let mut r2 = 0.0;
                    for j in 0..d {
                        u[j] = (x[j] - xi[j]) * inv;
                        r2 += u[j] * u[j];
                    }
                    let we = w * (-0.5 * r2).exp();
                    value_acc += we;
                    for j in 0..d {
                        grad_acc[j] += we * u[j];
                    }
                }
            }
        }
        self.finish(value_acc, grad_acc)
    }

    fn tree_unchecked(&self, tree: &KdTree, x: &[f64]) -> Evaluation {
        let inv = 1.0 / self.kernel.epsilon();
        let scaled: Vec<f64> = x.iter().map(|v| v * inv).collect();
        let mut grad_acc = vec![0.0; x.len()];
        let value_acc = tree.accumulate(&scaled, &mut grad_acc);
        self.finish(value_acc, grad_acc)
    }

    /// Direct `O(N)` summation, whatever the configured mode.
    pub fn evaluate_naive(&self, x: &[f64]) -> Result<Evaluation> {
        self.check_query(x)?;
        Ok(self.naive_unchecked(x))
    }

    /// `(ū(x), ∇ū(x))` using the configured mode.
    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        self.check_query(x)?;
        Ok(match &self.tree {
            Some(tree) => self.tree_unchecked(tree, x),
            None => self.naive_unchecked(x),
        })
    }

    /// Evaluates every point of the flattened `xs` (`Q × d`), in parallel.
    pub fn evaluate_batch(&self, xs: &[f64]) -> Result<Vec<Evaluation>> {
        let d = self.ensemble.dim;
        if !xs.len().is_multiple_of(d) {
            return Err(crate::error::Error::DimensionMismatch { expected: d, actual: xs.len() % d });
        }
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        self.check_query(&xs[..d])?;
        Ok(xs
            .par_chunks_exact(d)
            .map(|x| match &self.tree {
                Some(tree) => self.tree_unchecked(tree, x),
                None => self.naive_unchecked(x),
            })
            .collect())
    }

    /// Tree-accelerated batch evaluation. Requires tree mode.
    pub fn tree_evaluate(&self, xs: &[f64]) -> Result<Vec<Evaluation>> {
        match self.mode {
            EvalMode::Tree { .. } => self.evaluate_batch(xs),
            EvalMode::Naive => domain("tree evaluation requested on a naive-mode estimate"),
        }
    }

    /// Guaranteed `(value, gradient)` deviation of tree mode from the naive sum:
    /// `τ max G ‖K‖_∞ / ε^d` and `τ max G ‖∇K‖_∞ / ε^{d+1}`.
    pub fn tree_error_bounds(&self) -> Option<(f64, f64)> {
        match self.mode {
            EvalMode::Tree { tolerance } => {
                let g = self.ensemble.max_weight();
                Some((tolerance * g * self.kernel.sup_value(), tolerance * g * self.kernel.sup_gradient()))
            }
            EvalMode::Naive => None,
        }
    }

    /// `(1/N) Σ G^i`, the integral of `ū` since `∫ K_ε = 1`.
    pub fn total_mass(&self) -> f64 {
        self.ensemble.mean_weight()
    }
}

impl DensityField for DensityEstimate {
    fn dim(&self) -> usize {
        self.ensemble.dim
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        DensityEstimate::evaluate(self, x)
    }
}
