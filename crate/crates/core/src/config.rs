//! Flat TOML run manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{EvalMode, DEFAULT_TREE_TOLERANCE};
use crate::harness::{oracle_seed, ExperimentParams};
use crate::kernel::BaseKernel;
use crate::model::{Problem, DEFAULT_HORIZON, DEFAULT_Y_FLOOR};
use crate::oracle::OracleConfig;

pub const DEFAULT_PARTICLE_GRID: [usize; 5] = [1000, 3162, 10_000, 31_623, 50_000];
pub const DEFAULT_EPSILON_GRID: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];

/// Every knob of a run, sweep or oracle query. Missing keys take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `fokker-planck`, `burgers` or `kpz`.
    pub problem: String,
    pub dim: usize,
    pub nu: f64,
    pub horizon: f64,
    pub steps: usize,
    pub particles: usize,
    pub epsilon: f64,
    pub particles_grid: Vec<usize>,
    pub epsilon_grid: Vec<f64>,
    pub replicates: usize,
    pub eval_points: usize,
    pub seed: u64,
    pub kernel: String,
    /// `monte-carlo` or `gauss-hermite`.
    pub oracle: String,
    pub oracle_samples: usize,
    pub oracle_nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_cap: Option<f64>,
    pub y_floor: f64,
    /// `tree` or `naive`.
    pub evaluation: String,
    pub tree_tolerance: f64,
    /// Record wall-clock time in `runtime_ms`; off gives byte-reproducible CSV.
    pub timing: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plot_dir: Option<PathBuf>,
    /// Oracle query points, each `[t, x_1, …, x_d]`.
    pub points: Vec<Vec<f64>>,
    /// Worker threads, 0 for one per core.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "burgers".into(),
            dim: 1,
            nu: 0.1,
            horizon: DEFAULT_HORIZON,
            steps: 10,
            particles: 10_000,
            epsilon: 0.2,
            particles_grid: DEFAULT_PARTICLE_GRID.to_vec(),
            epsilon_grid: DEFAULT_EPSILON_GRID.to_vec(),
            replicates: 20,
            eval_points: 500,
            seed: 0,
            kernel: "gaussian".into(),
            oracle: "monte-carlo".into(),
            oracle_samples: 10_000,
            oracle_nodes: 200,
            lambda_cap: None,
            y_floor: DEFAULT_Y_FLOOR,
            evaluation: "tree".into(),
            tree_tolerance: DEFAULT_TREE_TOLERANCE,
            timing: true,
            output: None,
            plot_dir: None,
            points: Vec::new(),
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn problem_def(&self) -> Result<Problem> {
        Problem::by_name(&self.problem, self.dim, self.nu)?
            .with_horizon(self.horizon)?
            .with_lambda_cap(self.lambda_cap)?
            .with_y_floor(self.y_floor)
    }

    pub fn eval_mode(&self) -> Result<EvalMode> {
        match self.evaluation.as_str() {
            "tree" => Ok(EvalMode::Tree { tolerance: self.tree_tolerance }),
            "naive" => Ok(EvalMode::Naive),
            other => Err(Error::Config(format!("unknown evaluation mode '{other}'"))),
        }
    }

    pub fn oracle_config(&self) -> Result<OracleConfig> {
        match self.oracle.as_str() {
            "monte-carlo" => Ok(OracleConfig::monte_carlo(self.oracle_samples, oracle_seed(self.seed))),
            "gauss-hermite" => Ok(OracleConfig::gauss_hermite(self.oracle_nodes)),
            other => Err(Error::Config(format!("unknown oracle method '{other}'"))),
        }
    }

    pub fn params(&self) -> Result<ExperimentParams> {
        Ok(ExperimentParams {
            steps: self.steps,
            particles: self.particles,
            epsilon: self.epsilon,
            replicates: self.replicates,
            eval_points: self.eval_points,
            seed: self.seed,
            kernel: BaseKernel::from_name(&self.kernel)?,
            mode: self.eval_mode()?,
            timing: self.timing,
        })
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        self.problem_def()?;
        self.oracle_config()?;
        let p = self.params()?;
        if p.steps == 0 || p.particles == 0 || p.replicates == 0 || p.eval_points == 0 {
            return Err(Error::Config("steps, particles, replicates and eval_points must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.particles_grid.contains(&0) || self.epsilon_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::Config("grid entries must be positive".into()));
        }
        if !(self.tree_tolerance > 0.0 && self.tree_tolerance < 1.0) {
            return Err(Error::Config(format!("tree_tolerance must lie in (0, 1), got {}", self.tree_tolerance)));
        }
        Ok(())
    }
}
