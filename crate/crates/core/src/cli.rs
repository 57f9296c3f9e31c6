//! The `run`, `sweep`, `oracle` and `fit` commands behind the `fkp` binary.
//!
//! Each command writes its CSV to `output` when set, and to the supplied writer
//! otherwise. Output files are created only after the computation succeeds.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::harness::{self, Reference};
use crate::model::ProblemKind;
use crate::oracle;

fn check_output_dir(path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if parent.is_dir() {
        Ok(())
    } else {
        Err(Error::Config(format!("output directory {} does not exist", parent.display())))
    }
}

fn emit(cfg: &RunConfig, bytes: &[u8], stdout: &mut dyn Write) -> Result<()> {
    match &cfg.output {
        Some(path) => fs::write(path, bytes)?,
        None => stdout.write_all(bytes)?,
    }
    Ok(())
}

fn preflight(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    if let Some(out) = &cfg.output {
        check_output_dir(out)?;
    }
    if let Some(dir) = &cfg.plot_dir {
        if !dir.is_dir() {
            return Err(Error::Config(format!("plot directory {} does not exist", dir.display())));
        }
    }
    Ok(())
}

/// One experiment cell, one CSV data row.
pub fn cmd_run(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    preflight(cfg)?;
    let problem = cfg.problem_def()?;
    let record = harness::run_experiment(&problem, &cfg.params()?, &Reference::Oracle(cfg.oracle_config()?))?;
    let mut buf = Vec::new();
    harness::write_csv(std::slice::from_ref(&record), &mut buf)?;
    emit(cfg, &buf, stdout)
}

/// The `particles_grid × epsilon_grid` sweep, plus plot files when `plot_dir` is set.
pub fn cmd_sweep(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    preflight(cfg)?;
    let problem = cfg.problem_def()?;
    let records = harness::sweep(
        &problem,
        &cfg.params()?,
        &cfg.particles_grid,
        &cfg.epsilon_grid,
        &Reference::Oracle(cfg.oracle_config()?),
    )?;
    let mut buf = Vec::new();
    harness::write_csv(&records, &mut buf)?;
    emit(cfg, &buf, stdout)?;
    if let Some(dir) = &cfg.plot_dir {
        harness::write_plot_data(&records, dir)?;
    }
    Ok(())
}

/// Reference values at each `[t, x…]` of `points`: `problem,t,x1..xd,value,std_error`.
pub fn cmd_oracle(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    preflight(cfg)?;
    let problem = cfg.problem_def()?;
    let oc = cfg.oracle_config()?;
    let d = problem.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["problem".to_string(), "t".to_string()];
    header.extend((1..=d).map(|j| format!("x{j}")));
    header.extend(["value".to_string(), "std_error".to_string()]);
    w.write_record(&header)?;
    for p in &cfg.points {
        if p.len() != d + 1 {
            return Err(Error::Config(format!("oracle point {p:?} needs t followed by {d} coordinates")));
        }
        let (t, x) = (p[0], &p[1..]);
        let v = match problem.kind() {
            ProblemKind::FokkerPlanck { nu } => {
                oracle::OracleValue { value: oracle::fokker_planck_reference(t, x[0], nu)?, std_error: 0.0 }
            }
            ProblemKind::Burgers { nu } => oracle::burgers_reference(t, x[0], nu, &oc)?,
            ProblemKind::Kpz { nu } => oracle::kpz_reference(t, x, nu, &oc)?,
            ProblemKind::Custom => return Err(Error::Unsupported("custom problems have no oracle".into())),
        };
        let mut row = vec![problem.name().to_string()];
        row.extend(p.iter().map(|v| v.to_string()));
        row.extend([v.value.to_string(), v.std_error.to_string()]);
        w.write_record(&row)?;
    }
    let buf = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    emit(cfg, &buf, stdout)
}

/// Reads a sweep CSV and prints the `(N, ε_opt)` table followed by the fitted slope.
pub fn cmd_fit(csv_path: &Path, stdout: &mut dyn Write) -> Result<()> {
    let file = fs::File::open(csv_path)?;
    let records = harness::read_csv(file)?;
    let opt = harness::optimal_bandwidths(&records);
    writeln!(stdout, "N\tepsilon_opt")?;
    for (n, e) in &opt {
        writeln!(stdout, "{n}\t{e}")?;
    }
    let fit = harness::fit_slope(&opt)?;
    writeln!(stdout, "slope\t{}", fit.slope)?;
    writeln!(stdout, "intercept\t{}", fit.intercept)?;
    Ok(())
}
