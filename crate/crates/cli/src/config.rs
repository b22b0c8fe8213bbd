//! Run configuration: every hyperparameter of a reproduction run in one
//! TOML file. Unknown keys are rejected and values are validated on load.

use std::f64::consts::PI;
use std::path::Path;

use ots_core::geometry::StarConfig;
use ots_core::heat::HeatSettings;
use ots_core::surrogate::SurrogateConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; overridden by `--seed`.
    pub seed: u64,
    pub grid: GridConfig,
    pub geometry: GeometryConfig,
    pub doe: DoeConfig,
    pub heat: HeatSettings,
    pub surrogate: SurrogateConfig,
    pub bench: BenchConfig,
    pub service: ServiceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    /// Fraction of the largest domain extent added around the domains.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    /// Number of sampled domains K.
    pub count: usize,
    /// Steepness of the sigmoid applied to the signed distance.
    pub steepness: f64,
    pub star: StarConfig,
    /// Polygon CSV files used instead of random star domains.
    pub polygons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DoeConfig {
    /// Snapshots per domain P.
    pub snapshots: usize,
    pub theta: [f64; 2],
    pub lambda: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    /// Total snapshot counts of the matching sweep.
    pub counts: Vec<usize>,
    pub n_s: usize,
    pub sigma_s: f64,
    /// Generations run at every count (early stopping is disabled).
    pub generations: usize,
    pub population: usize,
    /// Polishing sweeps applied to the warm start.
    pub refine_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub port: u16,
    /// Concurrent inference workers.
    pub workers: usize,
    /// Allowed CORS origin; `*` allows any.
    pub cors_origin: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            grid: GridConfig::default(),
            geometry: GeometryConfig::default(),
            doe: DoeConfig::default(),
            heat: HeatSettings::default(),
            surrogate: SurrogateConfig::default(),
            bench: BenchConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nx: 128, ny: 128, margin: 0.2 }
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { count: 4, steepness: 50.0, star: StarConfig::default(), polygons: Vec::new() }
    }
}

impl Default for DoeConfig {
    fn default() -> Self {
        Self { snapshots: 30, theta: [0.05 * PI, 0.45 * PI], lambda: [0.05, 0.6] }
    }
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            counts: vec![20, 40, 60, 80, 100, 120],
            n_s: 60,
            sigma_s: 0.08,
            generations: 30,
            population: 32,
            refine_sweeps: 2,
        }
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { port: 8080, workers: 2, cors_origin: "*".into() }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> CliResult<()> {
    if r.iter().all(|v| v.is_finite()) && r[0] < r[1] {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{name} range must be finite with lower < upper, got {r:?}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.grid.nx < 8 || self.grid.ny < 8 {
            return Err(CliError::Usage("grid needs at least 8 nodes per axis".into()));
        }
        if !(self.grid.margin >= 0.0 && self.grid.margin.is_finite()) {
            return Err(CliError::Usage("grid.margin must be non-negative".into()));
        }
        if self.geometry.polygons.is_empty() && self.geometry.count == 0 {
            return Err(CliError::Usage("geometry.count must be positive".into()));
        }
        if !(self.geometry.steepness > 0.0 && self.geometry.steepness.is_finite()) {
            return Err(CliError::Usage("geometry.steepness must be positive".into()));
        }
        if self.doe.snapshots == 0 {
            return Err(CliError::Usage("doe.snapshots must be positive".into()));
        }
        check_range("doe.theta", self.doe.theta)?;
        check_range("doe.lambda", self.doe.lambda)?;
        if self.doe.lambda[0] <= 0.0 {
            return Err(CliError::Usage("doe.lambda must be positive".into()));
        }
        if self.bench.counts.is_empty() || self.bench.counts.iter().any(|&c| c < 2) {
            return Err(CliError::Usage("bench.counts needs entries of at least 2".into()));
        }
        if self.bench.n_s == 0 || !(self.bench.sigma_s > 0.0) || self.bench.population < 2 {
            return Err(CliError::Usage("bench needs n_s > 0, sigma_s > 0 and population >= 2".into()));
        }
        if self.service.workers == 0 {
            return Err(CliError::Usage("service.workers must be at least 1".into()));
        }
        self.heat.validate()?;
        self.surrogate.validate()?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Default configuration when `path` is `None`.
    pub fn load_or_default(path: Option<&Path>) -> CliResult<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run configuration serializes to TOML")
    }

    pub fn parameter_bounds(&self) -> [[f64; 2]; 2] {
        [self.doe.theta, self.doe.lambda]
    }
}
