//! C ABI over `fkparticle`.
//!
//! Objects are opaque handles created by `*_new`/`*_run` functions and released
//! with the matching `*_free`. Every fallible call returns an [`FkpStatus`];
//! on failure, [`fkp_last_error_message`] yields a description for the calling
//! thread. Panics never cross the boundary and are reported as
//! `FKP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use fkparticle::harness::{self, ExperimentParams, Reference};
use fkparticle::oracle::{self, OracleConfig};
use fkparticle::{run_scheme, Error, EvalMode, MollifierKernel, Problem, ProblemKind, SchemeState, TimeGrid};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FkpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Unsupported = 4,
    Numerical = 5,
    Config = 6,
    Io = 7,
    Panic = 8,
}

/// Oracle quadrature choice.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FkpOracleMethod {
    MonteCarlo = 0,
    GaussHermite = 1,
}

/// Oracle parameters. `samples` and `seed` apply to Monte Carlo, `nodes` to Gauss-Hermite.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct FkpOracleOptions {
    pub method: FkpOracleMethod,
    pub samples: usize,
    pub seed: u64,
    pub nodes: usize,
}

/// Parameters of one experiment cell. `tree_tolerance <= 0` selects naive evaluation.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct FkpExperimentParams {
    pub steps: usize,
    pub particles: usize,
    pub epsilon: f64,
    pub replicates: usize,
    pub eval_points: usize,
    pub seed: u64,
    pub tree_tolerance: f64,
}

/// Summary of an experiment cell.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct FkpExperimentResult {
    pub l1_mean: f64,
    pub l1_std: f64,
    pub runtime_ms: u64,
}

/// A problem definition.
pub struct FkpProblem {
    inner: Problem,
}

/// A completed particle run with every intermediate estimate.
pub struct FkpScheme {
    state: SchemeState,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_last_error(msg: &str) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.as_bytes().to_vec());
}

fn status_of(err: &Error) -> FkpStatus {
    match err {
        Error::Domain(_) => FkpStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => FkpStatus::DimensionMismatch,
        Error::Unsupported(_) => FkpStatus::Unsupported,
        Error::Numerical(_) => FkpStatus::Numerical,
        Error::Config(_) => FkpStatus::Config,
        Error::Io(_) | Error::Csv(_) => FkpStatus::Io,
    }
}

struct Failure(FkpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FkpStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(FkpStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FkpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            FkpStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            FkpStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn as_slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fkp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated, truncated to `len`).
///
/// Returns the full message length excluding the terminator, so a call with `len = 0` sizes the buffer.
///
/// # Safety
/// `buf` must point to `len` writable bytes or be null with `len = 0`.
#[no_mangle]
pub unsafe extern "C" fn fkp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a built-in problem: `"fokker-planck"`, `"burgers"` or `"kpz"`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fkp_problem_new(
    name: *const c_char,
    dim: usize,
    nu: f64,
    out: *mut *mut FkpProblem,
) -> FkpStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name).to_str().map_err(|_| invalid("name is not UTF-8"))?;
        let inner = Problem::by_name(name, dim, nu)?;
        write_out(out, Box::into_raw(Box::new(FkpProblem { inner })), "out")
    })
}

/// Sets the final time `T`.
///
/// # Safety
/// `problem` must come from [`fkp_problem_new`].
#[no_mangle]
pub unsafe extern "C" fn fkp_problem_set_horizon(problem: *mut FkpProblem, horizon: f64) -> FkpStatus {
    guard(|| {
        let p = problem.as_mut().ok_or_else(|| null("problem"))?;
        p.inner = p.inner.clone().with_horizon(horizon)?;
        Ok(())
    })
}

/// Clips `|Λ|` at `cap`; a non-positive `cap` removes the clipping.
///
/// # Safety
/// `problem` must come from [`fkp_problem_new`].
#[no_mangle]
pub unsafe extern "C" fn fkp_problem_set_lambda_cap(problem: *mut FkpProblem, cap: f64) -> FkpStatus {
    guard(|| {
        let p = problem.as_mut().ok_or_else(|| null("problem"))?;
        let cap = if cap > 0.0 {
            Some(cap)
        } else if cap.is_nan() {
            return Err(invalid("cap is NaN"));
        } else {
            None
        };
        p.inner = p.inner.clone().with_lambda_cap(cap)?;
        Ok(())
    })
}

/// Spatial dimension of `problem`, or 0 for a null handle.
///
/// # Safety
/// `problem` must come from [`fkp_problem_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn fkp_problem_dim(problem: *const FkpProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.dim())
}

/// # Safety
/// `problem` must come from [`fkp_problem_new`] or be null, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn fkp_problem_free(problem: *mut FkpProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

fn eval_mode(tree_tolerance: f64) -> EvalMode {
    if tree_tolerance > 0.0 {
        EvalMode::Tree { tolerance: tree_tolerance }
    } else {
        EvalMode::Naive
    }
}

/// Runs the particle scheme with `steps` Euler steps and `particles` particles.
///
/// `tree_tolerance <= 0` selects exact (naive) kernel sums.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fkp_scheme_run(
    problem: *const FkpProblem,
    steps: usize,
    particles: usize,
    epsilon: f64,
    seed: u64,
    tree_tolerance: f64,
    out: *mut *mut FkpScheme,
) -> FkpStatus {
    guard(|| {
        let p = as_ref(problem, "problem")?;
        let grid = TimeGrid::new(p.inner.horizon(), steps)?;
        let kernel = MollifierKernel::gaussian(p.inner.dim(), epsilon)?;
        let state = run_scheme(&p.inner, &grid, &kernel, particles, seed, eval_mode(tree_tolerance))?;
        write_out(out, Box::into_raw(Box::new(FkpScheme { state })), "out")
    })
}

/// Number of time steps `n`; estimates exist for steps `0..=n`. Returns 0 for a null handle.
///
/// # Safety
/// `scheme` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fkp_scheme_steps(scheme: *const FkpScheme) -> usize {
    scheme.as_ref().map_or(0, |s| s.state.grid().steps())
}

/// Number of particles, or 0 for a null handle.
///
/// # Safety
/// `scheme` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fkp_scheme_particles(scheme: *const FkpScheme) -> usize {
    scheme.as_ref().map_or(0, |s| s.state.bundle().particles())
}

/// Spatial dimension, or 0 for a null handle.
///
/// # Safety
/// `scheme` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fkp_scheme_dim(scheme: *const FkpScheme) -> usize {
    scheme.as_ref().map_or(0, |s| s.state.bundle().dim())
}

fn check_step(s: &FkpScheme, step: usize) -> Result<(), Failure> {
    let n = s.state.grid().steps();
    if step > n {
        return Err(invalid(format!("step {step} beyond the last step {n}")));
    }
    Ok(())
}

/// Writes the `particles` weights `G_k` of step `step` into `weights`.
///
/// # Safety
/// `scheme` must be a live handle; `weights` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fkp_scheme_weights(
    scheme: *const FkpScheme,
    step: usize,
    weights: *mut f64,
    len: usize,
) -> FkpStatus {
    guard(|| {
        let s = as_ref(scheme, "scheme")?;
        check_step(s, step)?;
        let w = s.state.weights(step);
        if len != w.len() {
            return Err(Error::DimensionMismatch { expected: w.len(), actual: len }.into());
        }
        as_slice_mut(weights, len, "weights")?.copy_from_slice(w);
        Ok(())
    })
}

/// Evaluates `ū` at step `step` on `count` points stored row-major in `xs` (`count × dim`).
///
/// `gradients` may be null; otherwise it receives `count × dim` doubles.
///
/// # Safety
/// `scheme` must be a live handle and the buffers must have the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn fkp_scheme_evaluate(
    scheme: *const FkpScheme,
    step: usize,
    xs: *const f64,
    count: usize,
    values: *mut f64,
    gradients: *mut f64,
) -> FkpStatus {
    guard(|| {
        let s = as_ref(scheme, "scheme")?;
        check_step(s, step)?;
        let d = s.state.bundle().dim();
        let xs = as_slice(xs, count * d, "xs")?;
        let field = s.state.field(step);
        let evals = fkparticle::solver::evaluate_field(field, xs)?;
        let values = as_slice_mut(values, count, "values")?;
        for (v, e) in values.iter_mut().zip(&evals) {
            *v = e.value;
        }
        if !gradients.is_null() {
            let g = slice::from_raw_parts_mut(gradients, count * d);
            for (row, e) in g.chunks_exact_mut(d).zip(&evals) {
                row.copy_from_slice(&e.gradient);
            }
        }
        Ok(())
    })
}

/// `∫ ū_{t_k}`, the mean particle weight at step `step ≥ 1` (1 at step 0 for a probability `u0`).
///
/// # Safety
/// `scheme` must be a live handle; `mass` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fkp_scheme_total_mass(scheme: *const FkpScheme, step: usize, mass: *mut f64) -> FkpStatus {
    guard(|| {
        let s = as_ref(scheme, "scheme")?;
        check_step(s, step)?;
        let m = if step == 0 { 1.0 } else { s.state.estimate(step).total_mass() };
        write_out(mass, m, "mass")
    })
}

/// # Safety
/// `scheme` must be a live handle or null, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn fkp_scheme_free(scheme: *mut FkpScheme) {
    if !scheme.is_null() {
        drop(Box::from_raw(scheme));
    }
}

fn oracle_config(o: &FkpOracleOptions) -> OracleConfig {
    match o.method {
        FkpOracleMethod::MonteCarlo => OracleConfig::monte_carlo(o.samples, o.seed),
        FkpOracleMethod::GaussHermite => OracleConfig::gauss_hermite(o.nodes),
    }
}

/// Reference solution of a built-in problem at `(t, x)`, `x` of length `dim`.
///
/// `options` may be null for Monte Carlo with 10 000 draws. `std_error` may be null.
///
/// # Safety
/// Pointers must be valid for the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn fkp_oracle_reference(
    problem: *const FkpProblem,
    t: f64,
    x: *const f64,
    dim: usize,
    options: *const FkpOracleOptions,
    value: *mut f64,
    std_error: *mut f64,
) -> FkpStatus {
    guard(|| {
        let p = as_ref(problem, "problem")?;
        if dim != p.inner.dim() {
            return Err(Error::DimensionMismatch { expected: p.inner.dim(), actual: dim }.into());
        }
        let x = as_slice(x, dim, "x")?;
        let cfg = options.as_ref().map(oracle_config).unwrap_or_default();
        let v = match p.inner.kind() {
            ProblemKind::FokkerPlanck { nu } => {
                oracle::OracleValue { value: oracle::fokker_planck_reference(t, x[0], nu)?, std_error: 0.0 }
            }
            ProblemKind::Burgers { nu } => oracle::burgers_reference(t, x[0], nu, &cfg)?,
            ProblemKind::Kpz { nu } => oracle::kpz_reference(t, x, nu, &cfg)?,
            ProblemKind::Custom => return Err(Error::Unsupported("custom problems have no oracle".into()).into()),
        };
        write_out(value, v.value, "value")?;
        if !std_error.is_null() {
            std_error.write(v.std_error);
        }
        Ok(())
    })
}

/// Runs `replicates` independent schemes and scores them against the oracle.
///
/// # Safety
/// Pointers must be valid; `options` may be null for the default oracle.
#[no_mangle]
pub unsafe extern "C" fn fkp_experiment_run(
    problem: *const FkpProblem,
    params: *const FkpExperimentParams,
    options: *const FkpOracleOptions,
    out: *mut FkpExperimentResult,
) -> FkpStatus {
    guard(|| {
        let p = as_ref(problem, "problem")?;
        let q = as_ref(params, "params")?;
        let mut ep = ExperimentParams::new(q.steps, q.particles, q.epsilon, q.replicates, q.eval_points, q.seed);
        ep.mode = eval_mode(q.tree_tolerance);
        let cfg = options
            .as_ref()
            .map(oracle_config)
            .unwrap_or_else(|| OracleConfig::monte_carlo(10_000, harness::oracle_seed(q.seed)));
        let r = harness::run_experiment(&p.inner, &ep, &Reference::Oracle(cfg))?;
        write_out(out, FkpExperimentResult { l1_mean: r.l1_mean, l1_std: r.l1_std, runtime_ms: r.runtime_ms }, "out")
    })
}
