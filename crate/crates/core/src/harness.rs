//! Error studies: the weighted `L¹` estimator, `(N, ε)` sweeps with replicates,
//! optimal-bandwidth extraction and log–log slope fits.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, domain, Error, Result};
use crate::estimator::{DensityField, EvalMode};
use crate::kernel::{BaseKernel, MollifierKernel};
use crate::model::{Problem, ProblemKind, TimeGrid};
use crate::oracle::{self, OracleConfig};
use crate::simulate::particle_rng;
use crate::solver::run_scheme;

/// SplitMix64 finaliser, used to derive independent seeds.
pub fn mix_seed(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `r` of a run seeded with `seed`.
pub fn replicate_seed(seed: u64, replicate: usize) -> u64 {
    mix_seed(seed ^ mix_seed(replicate as u64 + 1))
}

fn points_seed(seed: u64) -> u64 {
    mix_seed(seed ^ 0x0E7A_1F0E_57A1_0000)
}

/// Seed handed to Monte Carlo oracles when the caller does not pick one.
pub fn oracle_seed(seed: u64) -> u64 {
    mix_seed(seed ^ 0x0AC1_E000_0000_0001)
}

pub type PointFunction = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Points, `u0` at the points, and reference values when known.
type ScoringData = (Vec<f64>, Vec<f64>, Option<Vec<f64>>);

/// Reference solution `û_T` against which estimates are scored.
#[derive(Clone)]
pub enum Reference {
    /// The built-in oracle matching the problem kind.
    Oracle(OracleConfig),
    /// Any function of the evaluation point.
    Function(PointFunction),
    /// Replicate 0's own estimate. Only useful to test the pipeline.
    FirstReplicate,
}

/// Numerical parameters of one experiment cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentParams {
    pub steps: usize,
    pub particles: usize,
    pub epsilon: f64,
    pub replicates: usize,
    pub eval_points: usize,
    pub seed: u64,
    pub kernel: BaseKernel,
    pub mode: EvalMode,
    /// When false, `runtime_ms` is written as zero so outputs are byte-reproducible.
    pub timing: bool,
}

impl ExperimentParams {
    pub fn new(steps: usize, particles: usize, epsilon: f64, replicates: usize, eval_points: usize, seed: u64) -> Self {
        ExperimentParams {
            steps,
            particles,
            epsilon,
            replicates,
            eval_points,
            seed,
            kernel: BaseKernel::Gaussian,
            mode: EvalMode::default(),
            timing: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.particles == 0 || self.replicates == 0 || self.eval_points == 0 {
            return domain("steps, particles, replicates and evaluation points must all be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return domain(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }
}

/// One `(problem, N, ε, n, M, Q, seed)` outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub problem: String,
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n: usize,
    #[serde(rename = "N")]
    pub particles: usize,
    pub epsilon: f64,
    #[serde(rename = "M")]
    pub replicates: usize,
    #[serde(rename = "Q")]
    pub eval_points: usize,
    pub seed: u64,
    pub l1_mean: f64,
    pub l1_std: f64,
    pub runtime_ms: u64,
}

/// `(1/(M Q)) Σ_{i,j} |ū^i(X^j) - û(X^j)| / u0(X^j)` from precomputed tables.
///
/// `estimates[i][j]` is replicate `i` at point `j`.
pub fn l1_error_table(estimates: &[Vec<f64>], reference: &[f64], u0: &[f64]) -> Result<f64> {
    Ok(per_replicate_l1(estimates, reference, u0)?.iter().sum::<f64>() / estimates.len() as f64)
}

fn per_replicate_l1(estimates: &[Vec<f64>], reference: &[f64], u0: &[f64]) -> Result<Vec<f64>> {
    if estimates.is_empty() || reference.is_empty() {
        return domain("need at least one replicate and one evaluation point");
    }
    check_dim(reference.len(), u0.len())?;
    if let Some(j) = u0.iter().position(|p| !(*p > 0.0)) {
        return domain(format!("u0 vanishes at evaluation point {j}"));
    }
    let q = reference.len() as f64;
    estimates
        .iter()
        .map(|row| {
            check_dim(reference.len(), row.len())?;
            let s: f64 = row.iter().zip(reference).zip(u0).map(|((e, r), p)| (e - r).abs() / p).sum();
            Ok(s / q)
        })
        .collect()
}

/// The weighted `L¹` error of `M` estimates at the flattened points `points` (`Q × d`).
pub fn l1_error<F: DensityField>(
    estimates: &[F],
    reference: impl Fn(&[f64]) -> f64,
    points: &[f64],
    u0_density: impl Fn(&[f64]) -> f64,
) -> Result<f64> {
    let d = estimates.first().map(|e| e.dim()).ok_or_else(|| Error::Domain("no estimates".into()))?;
    let reference_values: Vec<f64> = points.chunks_exact(d).map(&reference).collect();
    let u0: Vec<f64> = points.chunks_exact(d).map(&u0_density).collect();
    let table = estimates
        .iter()
        .map(|e| points.chunks_exact(d).map(|x| e.evaluate(x).map(|v| v.value)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    l1_error_table(&table, &reference_values, &u0)
}

/// `Q` i.i.d. points from `u0`, independent of every particle stream.
pub fn evaluation_points(problem: &Problem, count: usize, seed: u64) -> Vec<f64> {
    let d = problem.dim();
    let mut rng = particle_rng(points_seed(seed), 0);
    let mut out = vec![0.0; count * d];
    for x in out.chunks_exact_mut(d) {
        problem.sample_u0(&mut rng, x);
    }
    out
}

/// `û_T` at each point, once per point.
pub fn reference_values(problem: &Problem, points: &[f64], cfg: &OracleConfig) -> Result<Vec<f64>> {
    let d = problem.dim();
    let t = problem.horizon();
    points
        .par_chunks_exact(d)
        .map(|x| match problem.kind() {
            ProblemKind::FokkerPlanck { nu } => oracle::fokker_planck_reference(t, x[0], nu),
            ProblemKind::Burgers { nu } => oracle::burgers_reference(t, x[0], nu, cfg).map(|v| v.value),
            ProblemKind::Kpz { nu } => oracle::kpz_reference(t, x, nu, cfg).map(|v| v.value),
            ProblemKind::Custom => Err(Error::Unsupported("no built-in reference for a custom problem".into())),
        })
        .collect()
}

struct Scoring<'a> {
    points: &'a [f64],
    u0: &'a [f64],
    reference: Option<&'a [f64]>,
}

fn run_cell(problem: &Problem, params: &ExperimentParams, scoring: &Scoring<'_>) -> Result<SweepRecord> {
    params.validate()?;
    let start = Instant::now();
    let grid = TimeGrid::new(problem.horizon(), params.steps)?;
    let kernel = MollifierKernel::new(params.kernel, problem.dim(), params.epsilon)?;
    let table: Vec<Vec<f64>> = (0..params.replicates)
        .into_par_iter()
        .map(|r| {
            let state =
                run_scheme(problem, &grid, &kernel, params.particles, replicate_seed(params.seed, r), params.mode)?;
            Ok(state.final_estimate().evaluate_batch(scoring.points)?.into_iter().map(|e| e.value).collect())
        })
        .collect::<Result<_>>()?;
    let reference = match scoring.reference {
        Some(r) => r,
        None => &table[0],
    };
    let per = per_replicate_l1(&table, reference, scoring.u0)?;
    let m = per.len() as f64;
    let l1_mean = per.iter().sum::<f64>() / m;
    let l1_std =
        if per.len() > 1 { (per.iter().map(|v| (v - l1_mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt() } else { 0.0 };
    let runtime_ms = if params.timing { start.elapsed().as_millis() as u64 } else { 0 };
    Ok(SweepRecord {
        problem: problem.name().to_string(),
        d: problem.dim(),
        horizon: problem.horizon(),
        n: params.steps,
        particles: params.particles,
        epsilon: params.epsilon,
        replicates: params.replicates,
        eval_points: params.eval_points,
        seed: params.seed,
        l1_mean,
        l1_std,
        runtime_ms,
    })
}

fn prepare_scoring(problem: &Problem, params: &ExperimentParams, reference: &Reference) -> Result<ScoringData> {
    let d = problem.dim();
    let points = evaluation_points(problem, params.eval_points, params.seed);
    let u0: Vec<f64> = points.chunks_exact(d).map(|x| problem.u0_density(x)).collect();
    let values = match reference {
        Reference::Oracle(cfg) => Some(reference_values(problem, &points, cfg)?),
        Reference::Function(f) => Some(points.chunks_exact(d).map(|x| f(x)).collect()),
        Reference::FirstReplicate => None,
    };
    Ok((points, u0, values))
}

/// `M` independent replicates of the scheme scored at `Q` points drawn from `u0`.
pub fn run_experiment(problem: &Problem, params: &ExperimentParams, reference: &Reference) -> Result<SweepRecord> {
    params.validate()?;
    let (points, u0, values) = prepare_scoring(problem, params, reference)?;
    run_cell(problem, params, &Scoring { points: &points, u0: &u0, reference: values.as_deref() })
}

/// Full `Ns × epsilons` grid, `N` outermost. Evaluation points and reference values are shared by all cells.
pub fn sweep(
    problem: &Problem,
    base: &ExperimentParams,
    particle_counts: &[usize],
    epsilons: &[f64],
    reference: &Reference,
) -> Result<Vec<SweepRecord>> {
    if particle_counts.is_empty() || epsilons.is_empty() {
        return domain("sweep grid must be non-empty");
    }
    let mut probe = *base;
    probe.particles = particle_counts[0];
    probe.epsilon = epsilons[0];
    probe.validate()?;
    let (points, u0, values) = prepare_scoring(problem, &probe, reference)?;
    let scoring = Scoring { points: &points, u0: &u0, reference: values.as_deref() };
    let mut records = Vec::with_capacity(particle_counts.len() * epsilons.len());
    for &particles in particle_counts {
        for &epsilon in epsilons {
            let params = ExperimentParams { particles, epsilon, ..*base };
            records.push(run_cell(problem, &params, &scoring)?);
        }
    }
    Ok(records)
}

/// For each `N` (ascending), the grid `ε` with the smallest `l1_mean`; ties go to the smaller `ε`.
pub fn optimal_bandwidths(records: &[SweepRecord]) -> Vec<(usize, f64)> {
    let mut best: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for r in records {
        best.entry(r.particles)
            .and_modify(|(eps, err)| {
                if r.l1_mean < *err || (r.l1_mean == *err && r.epsilon < *eps) {
                    *eps = r.epsilon;
                    *err = r.l1_mean;
                }
            })
            .or_insert((r.epsilon, r.l1_mean));
    }
    best.into_iter().map(|(n, (eps, _))| (n, eps)).collect()
}

/// Least-squares line `log y = intercept + slope log x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares in log–log coordinates.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.iter().any(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return domain("log-log fit needs positive coordinates");
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 2 {
        return domain("slope fit needs at least two distinct abscissae");
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit { slope, intercept: my - slope * mx })
}

/// Slope of `log ε_opt` against `log N`.
pub fn fit_slope(points: &[(usize, f64)]) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = points.iter().map(|(n, e)| (*n as f64, *e)).collect();
    fit_loglog(&pts)
}

/// Slope of `log l1_mean` against `log N` at one bandwidth.
pub fn error_rate_slope(records: &[SweepRecord], epsilon: f64) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> =
        records.iter().filter(|r| r.epsilon == epsilon).map(|r| (r.particles as f64, r.l1_mean)).collect();
    fit_loglog(&pts)
}

pub fn write_csv<W: Write>(records: &[SweepRecord], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["problem", "d", "T", "n", "N", "epsilon", "M", "Q", "seed", "l1_mean", "l1_std", "runtime_ms"])?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<SweepRecord>> {
    let mut rd = csv::Reader::from_reader(reader);
    let headers = rd.headers()?.clone();
    for want in ["N", "epsilon", "l1_mean"] {
        if !headers.iter().any(|h| h == want) {
            return Err(Error::Config(format!("sweep CSV lacks a '{want}' column")));
        }
    }
    Ok(rd.deserialize().collect::<std::result::Result<Vec<SweepRecord>, _>>()?)
}

/// Writes `error_vs_N.tsv`, `error_vs_epsilon.tsv` and `epsilon_opt_vs_N.tsv` into `dir`.
///
/// The first two hold one blank-line separated block per curve, each headed by a `#` comment.
pub fn write_plot_data(records: &[SweepRecord], dir: &Path) -> Result<()> {
    let mut eps: Vec<f64> = records.iter().map(|r| r.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let mut ns: Vec<usize> = records.iter().map(|r| r.particles).collect();
    ns.sort_unstable();
    ns.dedup();

    let mut by_n = String::new();
    for e in &eps {
        by_n.push_str(&format!("# epsilon={e}\n"));
        for r in records.iter().filter(|r| r.epsilon == *e) {
            by_n.push_str(&format!("{}\t{}\n", r.particles, r.l1_mean));
        }
        by_n.push('\n');
    }
    let mut by_eps = String::new();
    for n in &ns {
        by_eps.push_str(&format!("# N={n}\n"));
        for r in records.iter().filter(|r| r.particles == *n) {
            by_eps.push_str(&format!("{}\t{}\n", r.epsilon, r.l1_mean));
        }
        by_eps.push('\n');
    }
    let mut opt = String::from("# N\tepsilon_opt\n");
    for (n, e) in optimal_bandwidths(records) {
        opt.push_str(&format!("{n}\t{e}\n"));
    }
    fs::write(dir.join("error_vs_N.tsv"), by_n)?;
    fs::write(dir.join("error_vs_epsilon.tsv"), by_eps)?;
    fs::write(dir.join("epsilon_opt_vs_N.tsv"), opt)?;
    Ok(())
}
