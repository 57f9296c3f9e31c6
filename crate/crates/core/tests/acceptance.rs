//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use fkparticle::config::{DEFAULT_EPSILON_GRID, DEFAULT_PARTICLE_GRID};
use fkparticle::harness::{self, ExperimentParams, Reference, SweepRecord};
use fkparticle::model::Weighting;
use fkparticle::oracle::{self, OracleConfig};
use fkparticle::solver::path_weight;
use fkparticle::{
    make_burgers, make_fokker_planck, make_kpz, run_scheme, DensityEstimate, EvalMode, MollifierKernel,
    ParticleEnsemble, Problem, TimeGrid,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn mass_identities() -> Outcome {
    let start = Instant::now();
    let g = TimeGrid::new(0.1, 10).unwrap();
    let k = MollifierKernel::gaussian(1, 0.2).unwrap();
    let zero = Problem::new(1, 0.1).unwrap().with_weighting(Weighting::Zero);
    let one = Problem::new(1, 0.1).unwrap().with_weighting(Weighting::Constant(1.0));
    let m0 = run_scheme(&zero, &g, &k, 2000, 1, EvalMode::default()).unwrap().final_estimate().total_mass();
    let m1 = run_scheme(&one, &g, &k, 2000, 1, EvalMode::default()).unwrap().final_estimate().total_mass();
    let elapsed = start.elapsed();
    let want = 0.1f64.exp();
    let pass = (m0 - 1.0).abs() <= 1e-12 && (m1 - want).abs() <= 1e-9 && elapsed < Duration::from_secs(1);
    outcome(pass, format!("mass(Λ=0)={m0:.15} mass(Λ=1)={m1:.12} want {want:.12}, {:.3}s (limit 1s)", secs(elapsed)))
}

fn fokker_planck_sanity() -> Outcome {
    let start = Instant::now();
    let p = make_fokker_planck(0.1).unwrap();
    let params = ExperimentParams::new(10, 10_000, 0.2, 5, 500, 2024);
    let r = harness::run_experiment(&p, &params, &Reference::Oracle(OracleConfig::default())).unwrap();
    let elapsed = start.elapsed();
    outcome(
        r.l1_mean < 0.05 && elapsed < Duration::from_secs(30),
        format!("l1_mean={:.5} (limit 0.05), {:.1}s (limit 30s)", r.l1_mean, secs(elapsed)),
    )
}

struct BurgersGrid {
    records: Vec<SweepRecord>,
    elapsed: Duration,
}

fn burgers_grid() -> BurgersGrid {
    let start = Instant::now();
    let p = make_burgers(0.1).unwrap();
    let params = ExperimentParams::new(10, 1000, 0.2, 20, 500, 7);
    let rf = Reference::Oracle(OracleConfig::gauss_hermite(200));
    let records = harness::sweep(&p, &params, &DEFAULT_PARTICLE_GRID, &DEFAULT_EPSILON_GRID, &rf).unwrap();
    BurgersGrid { records, elapsed: start.elapsed() }
}

fn burgers_rate(grid: &BurgersGrid) -> Outcome {
    let cells: Vec<SweepRecord> =
        grid.records.iter().filter(|r| r.epsilon == 0.2 && r.particles <= 31_623).cloned().collect();
    let runtime: u64 = cells.iter().map(|r| r.runtime_ms).sum();
    let fit = harness::error_rate_slope(&cells, 0.2).unwrap();
    let errors: Vec<String> = cells.iter().map(|r| format!("{}:{:.4}", r.particles, r.l1_mean)).collect();
    outcome(
        (-0.75..=-0.25).contains(&fit.slope) && runtime < 600_000,
        format!(
            "slope={:.3} (band [-0.75,-0.25]) errors [{}], {:.1}s (limit 600s)",
            fit.slope,
            errors.join(" "),
            runtime as f64 / 1e3
        ),
    )
}

fn burgers_bandwidth(grid: &BurgersGrid) -> Outcome {
    let opt = harness::optimal_bandwidths(&grid.records);
    let monotone = opt.windows(2).all(|w| w[1].1 <= w[0].1);
    let fit = harness::fit_slope(&opt).unwrap();
    let table: Vec<String> = opt.iter().map(|(n, e)| format!("{n}:{e}")).collect();
    outcome(
        monotone && (fit.slope + 0.21).abs() <= 0.10 && grid.elapsed < Duration::from_secs(45 * 60),
        format!(
            "eps_opt [{}] non-increasing={monotone}, slope={:.3} (target -0.21±0.10), {:.0}s (limit 2700s)",
            table.join(" "),
            fit.slope,
            secs(grid.elapsed)
        ),
    )
}

fn kpz_desk_scale() -> Outcome {
    let start = Instant::now();
    let p = make_kpz(5, 0.1).unwrap().with_lambda_cap(Some(1e3)).unwrap();
    let params = ExperimentParams::new(10, 1000, 0.2, 5, 200, 11);
    let epsilons = [0.2, 0.3, 0.4, 0.5, 0.6];
    let rf = Reference::Oracle(OracleConfig::monte_carlo(10_000, harness::oracle_seed(11)));
    let records = harness::sweep(&p, &params, &[1000, 3162, 10_000], &epsilons, &rf).unwrap();
    let curve: Vec<f64> = records.iter().filter(|r| r.particles == 10_000).map(|r| r.l1_mean).collect();
    let argmin = curve.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    let u_shaped = argmin > 0 && argmin + 1 < curve.len();
    let opt = harness::optimal_bandwidths(&records);
    let eps_of = |n: usize| opt.iter().find(|(m, _)| *m == n).unwrap().1;
    let ordered = eps_of(10_000) <= eps_of(1000);
    let shown: Vec<String> = curve.iter().zip(&epsilons).map(|(v, e)| format!("{e}:{v:.4}")).collect();
    outcome(
        u_shaped && ordered,
        format!(
            "N=10000 curve [{}] interior minimum={u_shaped}, eps_opt(1000)={} eps_opt(10000)={}, {:.0}s",
            shown.join(" "),
            eps_of(1000),
            eps_of(10_000),
            secs(start.elapsed())
        ),
    )
}

fn random_ensemble(rng: &mut ChaCha8Rng, n: usize, d: usize) -> ParticleEnsemble {
    let pts: Vec<f64> = (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    ParticleEnsemble::new(d, pts, w).unwrap()
}

fn tree_vs_naive() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mode = EvalMode::Tree { tolerance: 1e-8 };
    let mut worst_rel: f64 = 0.0;
    let mut bound_ok = true;
    for trial in 0..20 {
        let d = if trial % 2 == 0 { 1 } else { 5 };
        let ens = random_ensemble(&mut rng, 5000, d);
        let eps = rng.random_range(0.1..0.6);
        let k = MollifierKernel::gaussian(d, eps).unwrap();
        let tree = DensityEstimate::new(ens.clone(), k.clone(), mode).unwrap();
        let naive = DensityEstimate::new(ens.clone(), k, EvalMode::Naive).unwrap();
        let queries = &ens.points()[..500 * d];
        let t = tree.tree_evaluate(queries).unwrap();
        let nv = naive.evaluate_batch(queries).unwrap();
        let (vb, gb) = tree.tree_error_bounds().unwrap();
        for (a, b) in t.iter().zip(&nv) {
            bound_ok &= (a.value - b.value).abs() <= vb;
            bound_ok &= a.gradient.iter().zip(&b.gradient).all(|(x, y)| (x - y).abs() <= gb);
            worst_rel = worst_rel.max((a.value - b.value).abs() / b.value);
        }
    }

    let ens = random_ensemble(&mut rng, 50_000, 1);
    let k = MollifierKernel::gaussian(1, 0.2).unwrap();
    let tree = DensityEstimate::new(ens.clone(), k.clone(), mode).unwrap();
    let naive = DensityEstimate::new(ens.clone(), k, EvalMode::Naive).unwrap();
    let start = Instant::now();
    let fast = tree.evaluate_batch(ens.points()).unwrap();
    let t_tree = start.elapsed();
    let start = Instant::now();
    let slow = naive.evaluate_batch(ens.points()).unwrap();
    let t_naive = start.elapsed();
    let (vb, _) = tree.tree_error_bounds().unwrap();
    bound_ok &= fast.iter().zip(&slow).all(|(a, b)| (a.value - b.value).abs() <= vb);
    let speedup = secs(t_naive) / secs(t_tree);
    outcome(
        bound_ok && worst_rel <= 1e-6 && speedup >= 3.0,
        format!(
            "within bounds={bound_ok}, worst relative value error={worst_rel:.2e} (limit 1e-6), speedup at N=50000 {speedup:.1}x (tree {:.2}s, naive {:.2}s, limit 3x)",
            secs(t_tree),
            secs(t_naive)
        ),
    )
}

fn lipschitz_bounds() -> Outcome {
    let cap = 1.0;
    let p = make_burgers(0.1).unwrap().with_lambda_cap(Some(cap)).unwrap();
    let g = TimeGrid::new(0.1, 10).unwrap();
    let eps = 0.2;
    let k = MollifierKernel::gaussian(1, eps).unwrap();
    let s = run_scheme(&p, &g, &k, 5000, 3, EvalMode::default()).unwrap();
    let growth = (cap * p.horizon()).exp();
    let lv = growth * k.value_lipschitz();
    let lg = growth * k.gradient_lipschitz();
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    let pairs = 10_000;
    for i in 0..pairs {
        let step = 1 + i % 10;
        let est = s.estimate(step);
        let x: f64 = rng.sample::<f64, _>(StandardNormal) * 1.5;
        let y = x + rng.random_range(-1.0..1.0) * if i % 2 == 0 { 0.05 } else { 1.0 };
        if x == y {
            continue;
        }
        let a = est.evaluate(&[x]).unwrap();
        let b = est.evaluate(&[y]).unwrap();
        let dist = (x - y).abs();
        let rv = (a.value - b.value).abs() / (lv * dist);
        let rg = (a.gradient[0] - b.gradient[0]).abs() / (lg * dist);
        worst = worst.max(rv).max(rg);
        if rv > 1.0 || rg > 1.0 {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations over {pairs} pairs, largest ratio to bound {worst:.3}"))
}

fn gradient_and_weights() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_fd: f64 = 0.0;
    for q in 0..100 {
        let d = 1 + q % 3;
        let ens = random_ensemble(&mut rng, 300, d);
        let est = DensityEstimate::new(ens, MollifierKernel::gaussian(d, 0.5).unwrap(), EvalMode::Naive).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let e = est.evaluate(&x).unwrap();
        let h = 1e-5;
        let scale = e.gradient.iter().map(|g| g.abs()).fold(0.0, f64::max).max(1e-3 * e.value);
        for l in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[l] += h;
            xm[l] -= h;
            let fd = (est.evaluate(&xp).unwrap().value - est.evaluate(&xm).unwrap().value) / (2.0 * h);
            worst_fd = worst_fd.max((fd - e.gradient[l]).abs() / scale);
        }
    }

    let p = make_burgers(0.1).unwrap();
    let g = TimeGrid::new(0.1, 10).unwrap();
    let k = MollifierKernel::gaussian(1, 0.3).unwrap();
    let s = run_scheme(&p, &g, &k, 500, 4, EvalMode::default()).unwrap();
    let mut worst_w: f64 = 0.0;
    for step in 0..=10 {
        for (i, w) in s.weights(step).iter().enumerate() {
            let pw = path_weight(&s.particle_lambdas(i, step), g.dt());
            worst_w = worst_w.max((pw - w).abs() / w);
        }
    }
    outcome(
        worst_fd < 1e-5 && worst_w <= 1e-12,
        format!(
            "gradient vs finite differences {worst_fd:.2e} (limit 1e-5), weight identity {worst_w:.2e} (limit 1e-12)"
        ),
    )
}

fn oracle_cross_validation() -> Outcome {
    let quad = OracleConfig::gauss_hermite(200);
    let probes: [(f64, f64); 10] = [
        (0.02, -2.0),
        (0.05, -1.0),
        (0.1, -0.5),
        (0.1, 0.0),
        (0.1, 0.3),
        (0.07, 0.8),
        (0.1, 1.5),
        (0.03, 2.2),
        (0.1, -1.7),
        (0.1, 3.0),
    ];
    let mut worst: f64 = 0.0;
    for (i, (t, x)) in probes.iter().enumerate() {
        let mc = OracleConfig::monte_carlo(100_000, 500 + i as u64);
        let b_mc = oracle::burgers_reference(*t, *x, 0.1, &mc).unwrap();
        let b_q = oracle::burgers_reference(*t, *x, 0.1, &quad).unwrap();
        worst = worst.max((b_mc.value - b_q.value).abs() / b_mc.std_error);
        let pt = [*x, 0.5 * x - 0.2];
        let k_mc = oracle::kpz_reference(*t, &pt, 0.5, &mc).unwrap();
        let k_q = oracle::kpz_reference(*t, &pt, 0.5, &quad).unwrap();
        worst = worst.max((k_mc.value - k_q.value).abs() / k_mc.std_error);
    }
    outcome(worst <= 3.0, format!("largest |MC - quadrature| over 20 probes = {worst:.2} SE (limit 3)"))
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} [{tag}] {name}: {}", o.detail);
        if !o.pass {
            failures += 1;
        }
    };
    report(1, "mass identities", mass_identities());
    report(2, "Fokker-Planck sanity", fokker_planck_sanity());
    let grid = burgers_grid();
    report(3, "Burgers N-rate", burgers_rate(&grid));
    report(4, "Burgers bandwidth trade-off", burgers_bandwidth(&grid));
    report(5, "KPZ desk-scale", kpz_desk_scale());
    report(6, "tree vs naive", tree_vs_naive());
    report(7, "Lipschitz bounds of the estimates", lipschitz_bounds());
    report(8, "gradient and weight identities", gradient_and_weights());
    report(9, "oracle cross-validation", oracle_cross_validation());
    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
