//! Forward Feynman–Kac particle approximations of semilinear parabolic PDEs
//!
//! ```text
//! ∂_t u = L*u + u Λ(t, x, u, ∇u),   u(0, ·) = u0,
//! ```
//!
//! where `L*` is the adjoint generator of `dY = Φ(t, Y) dW + g(t, Y) dt`.
//! Independent Euler–Maruyama particles carry multiplicative weights
//! `exp(∫ Λ ds)`, and a mollifier turns the weighted cloud into estimates of
//! `u` and `∇u` that feed back into the weights one time step later.
//!
//! The [`harness`] module reproduces the Burgers and KPZ error studies against
//! the Cole–Hopf references in [`oracle`].
// `!(x > 0.0)` is used on purpose so that NaN is rejected together with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod gauss;
pub mod harness;
pub mod kernel;
pub mod model;
pub mod oracle;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
pub use estimator::{DensityEstimate, DensityField, EvalMode, Evaluation, ParticleEnsemble};
pub use kernel::{BaseKernel, MollifierKernel};
pub use model::{make_burgers, make_fokker_planck, make_kpz, Problem, ProblemKind, TimeGrid};
pub use oracle::{OracleConfig, OracleMethod, OracleValue};
pub use simulate::{simulate_paths, PathBundle};
pub use solver::{run_scheme, SchemeState};
