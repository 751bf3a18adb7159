//! Run configuration: the JSON formats accepted by the `repobs` binary.
//!
//! A run is a single JSON file naming the problem file, the classifier,
//! the t-grid, trial count, seed, output directory, and the bound
//! families to evaluate. Every random quantity derives from the one seed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::models::{ClassModel, DiscreteClass, GaussianClass, ModelError, Problem};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON in {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("invalid problem: {0}")]
    Problem(#[from] ModelError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

// ── problem files ───────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ClassSpec {
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    Discrete { support: Vec<Vec<f64>>, pmf: Vec<f64> },
}

/// On-disk problem description. Covariances are row-major and validated
/// SPD at load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub d: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub priors: Vec<f64>,
    pub classes: Vec<ClassSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prototypes: Option<Vec<Vec<f64>>>,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem, ConfigError> {
        if self.classes.len() != self.m {
            return Err(ConfigError::Invalid(format!(
                "M = {} but {} classes given",
                self.m,
                self.classes.len()
            )));
        }
        let mut classes = Vec::with_capacity(self.m);
        for spec in &self.classes {
            let model = match spec {
                ClassSpec::Gaussian { mean, cov } => {
                    let d = mean.len();
                    if cov.len() != d || cov.iter().any(|r| r.len() != d) {
                        return Err(ConfigError::Invalid("covariance must be d x d".into()));
                    }
                    let cov = Matrix::from_rows(cov);
                    ClassModel::Gaussian(GaussianClass::new(mean.clone(), cov)?)
                }
                ClassSpec::Discrete { support, pmf } => {
                    ClassModel::Discrete(DiscreteClass::new(support.clone(), pmf.clone())?)
                }
            };
            if model.dim() != self.d {
                return Err(ConfigError::Invalid(format!(
                    "class dimension {} does not match d = {}",
                    model.dim(),
                    self.d
                )));
            }
            classes.push(model);
        }
        Ok(Problem::new(classes, self.priors.clone(), self.prototypes.clone())?)
    }
}

pub fn load_problem(path: &Path) -> Result<(Problem, ProblemSpec, Vec<u8>), ConfigError> {
    let bytes = fs::read(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    let spec: ProblemSpec = serde_json::from_slice(&bytes)
        .map_err(|source| ConfigError::Json { path: path.into(), source })?;
    let problem = spec.build()?;
    Ok((problem, spec, bytes))
}

// ── classifier descriptors ──────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ElementaryKind {
    NominalMl,
    Prototype,
    Linear,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum UtilityKind {
    Indicator,
    LogDensity,
    NegSqDistance,
}

/// Classifier selection. A bare string picks the kind with defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassifierSpec {
    Majority {
        #[serde(default)]
        elementary: Option<ElementaryKind>,
    },
    Ml,
    Utility {
        utility: UtilityKind,
        #[serde(default)]
        elementary: Option<ElementaryKind>,
    },
    Robust {
        #[serde(default)]
        n_mc: Option<usize>,
    },
    Prototype,
    PrototypeTransformed {
        #[serde(default)]
        transform_file: Option<String>,
        #[serde(default)]
        transform: Option<Vec<Vec<f64>>>,
    },
    Linear {
        #[serde(default)]
        a: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassifierField {
    Name(String),
    Spec(ClassifierSpec),
}

impl ClassifierField {
    pub fn resolve(&self) -> Result<ClassifierSpec, ConfigError> {
        match self {
            ClassifierField::Spec(spec) => Ok(spec.clone()),
            ClassifierField::Name(name) => match name.as_str() {
                "majority" => Ok(ClassifierSpec::Majority { elementary: None }),
                "ml" => Ok(ClassifierSpec::Ml),
                "robust" => Ok(ClassifierSpec::Robust { n_mc: None }),
                "prototype" => Ok(ClassifierSpec::Prototype),
                "prototype-transformed" => Ok(ClassifierSpec::PrototypeTransformed {
                    transform_file: None,
                    transform: None,
                }),
                "linear" => Ok(ClassifierSpec::Linear { a: None }),
                other => Err(ConfigError::Invalid(format!(
                    "unknown classifier '{other}' (utility needs the object form with a 'utility' field)"
                ))),
            },
        }
    }
}

// ── t-grid ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TGrid {
    Spec(String),
    List(Vec<usize>),
}

/// Parses "a:b:step" or an explicit ascending list.
pub fn parse_t_grid(grid: &TGrid) -> Result<Vec<usize>, ConfigError> {
    let values = match grid {
        TGrid::List(list) => list.clone(),
        TGrid::Spec(spec) => {
            let parts: Vec<&str> = spec.split(':').collect();
            if parts.len() != 3 {
                return Err(ConfigError::Invalid(format!(
                    "t-grid spec '{spec}' must be 'a:b:step'"
                )));
            }
            let parse = |s: &str| -> Result<usize, ConfigError> {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| ConfigError::Invalid(format!("bad t-grid number '{s}'")))
            };
            let (a, b, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
            if step == 0 {
                return Err(ConfigError::Invalid("t-grid step must be positive".into()));
            }
            (a..=b).step_by(step).collect()
        }
    };
    if values.is_empty() {
        return Err(ConfigError::Invalid("t-grid is empty".into()));
    }
    if values.contains(&0) {
        return Err(ConfigError::Invalid("t values must be at least 1".into()));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::Invalid("t-grid must be strictly ascending".into()));
    }
    Ok(values)
}

// ── utility moments ─────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum MomentsSpec {
    /// Indicator utilities of the elementary rule; q is the confusion
    /// matrix and K = 1.
    Indicator {
        #[serde(default)]
        c1: Option<f64>,
    },
    /// Prototype utilities from the problem's prototypes and covariances.
    Prototype {
        #[serde(default)]
        k: Option<f64>,
        #[serde(default)]
        c1: Option<f64>,
    },
    Explicit {
        q: Vec<Vec<f64>>,
        variances: Vec<Vec<f64>>,
        #[serde(default)]
        k: Option<f64>,
        #[serde(default)]
        c1: Option<f64>,
    },
}

// ── optimizer selection ─────────────────────────────────────────────

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OptimizerSpec {
    /// Stopping tolerance on ρ improvements.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    /// Number of extra seeded random orthonormal starts (0 = deterministic
    /// identity-column start only).
    #[serde(default)]
    pub multistart: Option<usize>,
    /// Add εI to S_W when it fails the definiteness check.
    #[serde(default)]
    pub regularize: Option<f64>,
}

// ── the run configuration ───────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Path to the problem JSON, relative to the config file.
    pub problem: String,
    pub classifier: ClassifierField,
    pub t_grid: TGrid,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
    /// Bound families to evaluate; empty list means none.
    #[serde(default)]
    pub bounds: Vec<String>,
    /// Explicit elementary confusion matrix; estimated when absent.
    #[serde(default)]
    pub confusion: Option<Vec<Vec<f64>>>,
    /// Sample count for confusion estimation (default 10⁵).
    #[serde(default)]
    pub confusion_samples: Option<usize>,
    /// Distortion margin ε for the robust-rule bound.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub moments: Option<MomentsSpec>,
    #[serde(default)]
    pub optimizer: Option<OptimizerSpec>,
}

fn default_trials() -> usize {
    100_000
}

/// A loaded config together with the directory its relative paths resolve
/// against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let bytes = fs::read(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    let config: RunConfig = serde_json::from_slice(&bytes)
        .map_err(|source| ConfigError::Json { path: path.into(), source })?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    Ok(LoadedConfig { config, base_dir })
}

impl LoadedConfig {
    pub fn problem_path(&self) -> PathBuf {
        let p = Path::new(&self.config.problem);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
