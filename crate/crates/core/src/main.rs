use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fkparticle::cli::{cmd_fit, cmd_oracle, cmd_run, cmd_sweep};
use fkparticle::config::RunConfig;
use fkparticle::{Error, Result};

#[derive(Parser)]
#[command(name = "fkp", version, about = "Forward Feynman-Kac particle solver for semilinear parabolic PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One experiment cell, one CSV row.
    Run(RunArgs),
    /// The particles_grid x epsilon_grid sweep.
    Sweep(RunArgs),
    /// Reference values at the configured (t, x) points.
    Oracle(RunArgs),
    /// Optimal bandwidths and their log-log slope from a sweep CSV.
    Fit { csv: PathBuf },
}

/// `--config` plus one flag per config key. Flags win over the file.
#[derive(Args, Default)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, alias = "output")]
    out: Option<PathBuf>,
    #[arg(long, env = "FKP_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long = "particles_grid", alias = "particles-grid", value_delimiter = ',')]
    particles_grid: Option<Vec<usize>>,
    #[arg(long = "epsilon_grid", alias = "epsilon-grid", value_delimiter = ',')]
    epsilon_grid: Option<Vec<f64>>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long = "eval_points", alias = "eval-points")]
    eval_points: Option<usize>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long = "oracle_samples", alias = "oracle-samples")]
    oracle_samples: Option<usize>,
    #[arg(long = "oracle_nodes", alias = "oracle-nodes")]
    oracle_nodes: Option<usize>,
    #[arg(long = "lambda_cap", alias = "lambda-cap")]
    lambda_cap: Option<f64>,
    #[arg(long = "y_floor", alias = "y-floor")]
    y_floor: Option<f64>,
    #[arg(long)]
    evaluation: Option<String>,
    #[arg(long = "tree_tolerance", alias = "tree-tolerance")]
    tree_tolerance: Option<f64>,
    #[arg(long)]
    timing: Option<bool>,
    #[arg(long = "plot_dir", alias = "plot-dir")]
    plot_dir: Option<PathBuf>,
    /// Oracle query `t,x1,...,xd`; repeatable.
    #[arg(long = "point")]
    points: Vec<String>,
}

macro_rules! override_fields {
    ($cfg:ident, $args:ident; $($field:ident),*) => {
        $(if let Some(v) = $args.$field { $cfg.$field = v; })*
    };
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let args = self;
        override_fields!(cfg, args; threads, seed, problem, dim, nu, horizon, steps, particles, epsilon,
            particles_grid, epsilon_grid, replicates, eval_points, kernel, oracle, oracle_samples,
            oracle_nodes, y_floor, evaluation, tree_tolerance, timing);
        if let Some(out) = args.out {
            cfg.output = Some(out);
        }
        if let Some(dir) = args.plot_dir {
            cfg.plot_dir = Some(dir);
        }
        if let Some(cap) = args.lambda_cap {
            cfg.lambda_cap = Some(cap);
        }
        if !args.points.is_empty() {
            cfg.points = args
                .points
                .iter()
                .map(|p| {
                    p.split(',')
                        .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad point '{p}': {e}"))))
                        .collect()
                })
                .collect::<Result<_>>()?;
        }
        Ok(cfg)
    }
}

fn install_threads(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))
}

type CommandFn = fn(&RunConfig, &mut dyn io::Write) -> Result<()>;

fn dispatch(command: Command) -> Result<()> {
    let mut stdout = io::stdout().lock();
    let (cfg, f): (RunConfig, CommandFn) = match command {
        Command::Fit { csv } => return cmd_fit(&csv, &mut stdout),
        Command::Run(a) => (a.into_config()?, cmd_run),
        Command::Sweep(a) => (a.into_config()?, cmd_sweep),
        Command::Oracle(a) => (a.into_config()?, cmd_oracle),
    };
    install_threads(cfg.threads)?;
    f(&cfg, &mut stdout)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fkp: {e}");
            ExitCode::FAILURE
        }
    }
}
