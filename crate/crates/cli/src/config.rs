//! The JSON experiment document and its validation.

use std::fmt;
use std::path::Path;

use contagion::chf::axis_grid;
use contagion::displacement::DisplacementSpec;
use contagion::env::{EnvironmentSpec, InitialPoint, OffspringSpec, ResourceSpec, WeightRegime};
use contagion::rng::derive_seed;
use contagion::Model;
use serde::{Deserialize, Serialize};

/// Configuration problem; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub initial: Vec<InitialPoint>,
    pub regime: WeightRegime,
    #[serde(default)]
    pub offspring: OffspringSpec,
    #[serde(default)]
    pub resource: ResourceSpec,
    pub displacement: DisplacementSpec,
    pub steps: usize,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub options: Options,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOptions {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            count: 25,
            lo: -3.0,
            hi: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// ch.f. evaluation grid, `count` points per axis.
    pub grid: GridOptions,
    /// Monte Carlo draws per side for `oracle` and `identity`.
    pub draws: usize,
    /// Multiplier on standard errors for moment and ch.f. checks.
    pub se_factor: f64,
    /// Multiplier on the KS critical values.
    pub ks_factor: f64,
    pub cov_rel_tol: f64,
    /// Relative tolerance on the drift centering.
    pub drift_rel_tol: f64,
    /// Absolute tolerance on `mean / n - lambda` in the exponential regime.
    pub mean_tol: f64,
    pub tv_tol: f64,
    pub chf_tol: f64,
    pub segment_ks_tol: f64,
    /// Forward replicates for the segment check (0 skips it).
    pub segment_replicates: usize,
    /// Horizon for the deterministic drift evaluation; defaults to `steps`.
    pub drift_steps: Option<usize>,
    pub max_outcomes: u64,
    /// `(generation, index)` examined by `oracle`; defaults to the last point.
    pub point: Option<(usize, usize)>,
    pub tail_tol: f64,
    pub stab_tol: f64,
    pub ergodic_tol: f64,
    /// Write one points CSV per replicate in `simulate`.
    pub write_points: bool,
    pub bench_sizes: Vec<usize>,
    pub bench_draws: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            grid: GridOptions::default(),
            draws: 100_000,
            se_factor: 4.0,
            ks_factor: 1.5,
            cov_rel_tol: 0.15,
            drift_rel_tol: 0.1,
            mean_tol: 0.02,
            tv_tol: 0.005,
            chf_tol: 1e-10,
            segment_ks_tol: 0.05,
            segment_replicates: 0,
            drift_steps: None,
            max_outcomes: 100_000_000,
            point: None,
            tail_tol: 1e-12,
            stab_tol: 1e-6,
            ergodic_tol: 1e-12,
            write_points: true,
            bench_sizes: vec![1_000, 10_000, 100_000, 1_000_000],
            bench_draws: 1_000_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-field checks that serde cannot express.
    pub fn validate(&self) -> anyhow::Result<()> {
        let d = self.dimension;
        if d == 0 {
            return Err(config_error("dimension must be at least 1"));
        }
        if self.initial.is_empty() {
            return Err(config_error("initial configuration is empty"));
        }
        if let Some(p) = self.initial.iter().find(|p| p.x.len() != d) {
            return Err(config_error(format!(
                "initial point {:?} has dimension {}, expected {d}",
                p.x,
                p.x.len()
            )));
        }
        let law_dim = self
            .displacement
            .dim()
            .map_err(|e| config_error(e.to_string()))?;
        if law_dim != d {
            return Err(config_error(format!(
                "displacement dimension {law_dim} differs from dimension {d}"
            )));
        }
        if self.steps == 0 {
            return Err(config_error("steps must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(config_error("replicates must be at least 1"));
        }
        let o = &self.options;
        if o.grid.count == 0 || !(o.grid.lo <= o.grid.hi) {
            return Err(config_error("grid needs count >= 1 and lo <= hi"));
        }
        if o.draws == 0 || o.bench_draws == 0 {
            return Err(config_error("draw counts must be at least 1"));
        }
        if o.bench_sizes.iter().any(|&n| n < 2) {
            return Err(config_error("bench sizes must be at least 2"));
        }
        self.regime
            .validate()
            .map_err(|e| config_error(e.to_string()))
    }

    pub fn env_spec(&self) -> EnvironmentSpec {
        EnvironmentSpec {
            regime: self.regime.clone(),
            offspring: self.offspring.clone(),
            resource: self.resource.clone(),
            displacement: self.displacement.clone(),
        }
    }

    /// Seed of the environment sequence.
    pub fn env_seed(&self) -> u64 {
        derive_seed(self.seed, 0)
    }

    /// Base seed of the replicate streams of a command stage.
    pub fn stream_seed(&self, stage: u64) -> u64 {
        derive_seed(self.seed, 1 + stage)
    }

    /// Materializes `steps` steps of the environment.
    pub fn model(&self, steps: usize) -> anyhow::Result<Model> {
        Model::from_spec(
            self.initial.clone(),
            &self.env_spec(),
            steps,
            self.env_seed(),
        )
        .map_err(|e| config_error(e.to_string()))
    }

    pub fn grid(&self) -> Vec<Vec<f64>> {
        let g = &self.options.grid;
        axis_grid(self.dimension, g.count, g.lo, g.hi)
    }
}
