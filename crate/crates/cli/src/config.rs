use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sparsespike::ensembles::{DegreeSpec, Ensemble, SpikeSpec, WeightSpec};
use sparsespike::popdyn::PopDynConfig;
use sparsespike::spectral::LanczosOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Analytic,
    Popdyn,
    Diag,
    Densities,
    Sweep,
}

/// A scalar, an explicit list, or an inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    One(f64),
    Many(Vec<f64>),
    Range(Range),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::One(x) => vec![*x],
            Grid::Many(v) => v.clone(),
            Grid::Range(r) => {
                if !(r.step > 0.0) || r.stop < r.start {
                    return Vec::new();
                }
                let n = ((r.stop - r.start) / r.step + 1e-9).floor() as usize;
                (0..=n).map(|i| r.start + i as f64 * r.step).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LanczosConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub krylov_dim: usize,
    pub keep: usize,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        let d = LanczosOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            krylov_dim: d.krylov_dim,
            keep: d.keep,
        }
    }
}

impl LanczosConfig {
    pub fn options(&self) -> LanczosOptions {
        LanczosOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            krylov_dim: self.krylov_dim,
            keep: self.keep,
        }
    }
}

fn default_theta() -> Grid {
    Grid::One(0.0)
}
fn default_n() -> usize {
    2000
}
fn default_instances() -> usize {
    10
}
fn default_density_samples() -> usize {
    1_000_000
}
fn default_dump_cap() -> usize {
    10_000
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_weight() -> WeightSpec {
    WeightSpec::Constant { w: 1.0 }
}
fn default_spike() -> SpikeSpec {
    SpikeSpec::Gaussian { variance: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub degree: DegreeSpec,
    #[serde(default = "default_weight")]
    pub weight: WeightSpec,
    #[serde(default = "default_spike")]
    pub spike: SpikeSpec,
    #[serde(default = "default_theta")]
    pub theta: Grid,
    /// Replaces the connectivity parameter of `degree` (`c` or `c̄`).
    #[serde(default)]
    pub connectivity: Option<Grid>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default)]
    pub popdyn: PopDynConfig,
    /// Start the population from the analytic `(λ_θ, q)`.
    #[serde(default)]
    pub warm_start: bool,
    /// Structural eigenvalue for the general analytic pipeline; computed by
    /// population dynamics when absent.
    #[serde(default)]
    pub lambda_structural: Option<f64>,
    #[serde(default)]
    pub lanczos: LanczosConfig,
    #[serde(default = "default_density_samples")]
    pub density_samples: usize,
    #[serde(default = "default_dump_cap")]
    pub sample_dump_cap: usize,
    /// Also write every instance as an edge list plus side file.
    #[serde(default)]
    pub dump_instances: bool,
    /// Densities mode: compare against components of `instances` matrices.
    #[serde(default)]
    pub compare_instances: bool,
    /// Pool full spectra of the diagonalised instances (dense path).
    #[serde(default)]
    pub spectrum: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Syntax {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn bad(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

/// One point of the connectivity grid, with its built ensemble.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub c: Option<f64>,
    pub ensemble: Ensemble,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.theta.values()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let thetas = self.thetas();
        if thetas.is_empty() {
            return Err(bad("theta", "grid must be non-empty"));
        }
        if let Some(t) = thetas.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(bad("theta", format!("values must be finite and >= 0, got {t}")));
        }
        if let Some(c) = &self.connectivity {
            if c.values().is_empty() {
                return Err(bad("connectivity", "grid must be non-empty"));
            }
        }
        if self.n < 2 {
            return Err(bad("n", "must be at least 2"));
        }
        if self.instances < 1 {
            return Err(bad("instances", "must be at least 1"));
        }
        if self.density_samples < 1 {
            return Err(bad("density_samples", "must be positive"));
        }
        if !(self.lanczos.tol > 0.0) || self.lanczos.max_iter == 0 || self.lanczos.krylov_dim < 2 {
            return Err(bad("lanczos", "tol, max_iter and krylov_dim must be positive (krylov_dim >= 2)"));
        }
        if let Some(l) = self.lambda_structural {
            if !(l > 0.0 && l.is_finite()) {
                return Err(bad("lambda_structural", "must be positive"));
            }
        }
        self.popdyn
            .validate()
            .map_err(|e| bad("popdyn", e.to_string()))?;
        self.grid_points()?;
        Ok(())
    }

    /// Ensembles for every connectivity value (or the single configured one).
    pub fn grid_points(&self) -> Result<Vec<GridPoint>, ConfigError> {
        let weight = self.weight.build().map_err(|e| bad("weight", e.to_string()))?;
        let spike = self.spike.build().map_err(|e| bad("spike", e.to_string()))?;
        let specs: Vec<(Option<f64>, DegreeSpec)> = match &self.connectivity {
            None => vec![(self.degree.connectivity(), self.degree.clone())],
            Some(grid) => grid
                .values()
                .into_iter()
                .map(|c| {
                    self.degree
                        .with_connectivity(c)
                        .map(|d| (Some(c), d))
                        .map_err(|e| bad("connectivity", e.to_string()))
                })
                .collect::<Result<_, _>>()?,
        };
        specs
            .into_iter()
            .map(|(c, degree)| {
                let model = degree.build().map_err(|e| bad("degree", e.to_string()))?;
                Ok(GridPoint {
                    c,
                    ensemble: Ensemble::new(model, weight.clone(), spike.clone()),
                })
            })
            .collect()
    }

    /// Compact JSON echo for output headers.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }
}
