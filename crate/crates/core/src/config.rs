//! TOML experiment configuration.
//!
//! ```toml
//! schema_version = 1
//! particles = 100
//!
//! [target]
//! kind = "gaussian"
//! mean = [0.0, 0.0]
//! covariance = [[1.0, 0.0], [0.0, 1.0]]
//!
//! [sampler]
//! kind = "spos"
//! beta = 1.0
//! batch_size = 1
//! total_steps = 1000
//! seed = 7
//! step_size = { schedule = "constant", h0 = 0.05 }
//!
//! [kernel]
//! bandwidth = "median"        # or { fixed = 0.5 }
//!
//! [init]
//! mean = [0.0, 0.0]
//! scale = 1.0
//!
//! [outputs]
//! trace_path = "trace.csv"
//! summary_path = "summary.json"
//! snapshot_every = 10
//! ```
//!
//! Relative paths resolve against the directory containing the config file.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SamplerError};
use crate::kernel::KernelConfig;
use crate::samplers::{ParticleEnsemble, SamplerConfig};
use crate::target::{
    make_bayes_linreg, GaussianTarget, GaussianTargetParams, MixtureComponent, MixtureTarget,
    MultimodeParams, MultimodeTarget, PotentialModel, RegressionDataset,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        #[serde(default = "one")]
        split_count: usize,
    },
    Multimode {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coefficients: Option<[f64; 10]>,
    },
    Mixture {
        components: Vec<MixtureComponent>,
    },
    BayesLinreg {
        csv_path: PathBuf,
        noise_std: f64,
        prior_std: f64,
    },
}

fn one() -> usize {
    1
}

impl TargetConfig {
    /// Builds the model; `base` anchors a relative `csv_path`.
    pub fn build(&self, base: &Path) -> Result<Box<dyn PotentialModel>> {
        let model: Box<dyn PotentialModel> = match self {
            TargetConfig::Gaussian {
                mean,
                covariance,
                split_count,
            } => Box::new(
                GaussianTarget::new(&GaussianTargetParams {
                    mean: mean.clone(),
                    covariance: covariance.clone(),
                    split_count: *split_count,
                })
                .map_err(|e| SamplerError::Config(format!("target: {e}")))?,
            ),
            TargetConfig::Multimode { coefficients } => {
                let params = coefficients.map_or_else(MultimodeParams::default, |c| MultimodeParams {
                    coefficients: c,
                });
                Box::new(MultimodeTarget::new(params))
            }
            TargetConfig::Mixture { components } => Box::new(
                MixtureTarget::new(components.clone())
                    .map_err(|e| SamplerError::Config(format!("target.components: {e}")))?,
            ),
            TargetConfig::BayesLinreg {
                csv_path,
                noise_std,
                prior_std,
            } => {
                let data = RegressionDataset::from_csv(resolve(base, csv_path), *noise_std, *prior_std)?;
                Box::new(make_bayes_linreg(&data)?)
            }
        };
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub mean: Vec<f64>,
    pub scale: f64,
}

fn default_snapshot_every() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: u64,
    /// Reference batches per W₁ evaluation in the summary.
    #[serde(default = "default_w1_repeats")]
    pub w1_repeats: usize,
    /// Capture radius for mode coverage; defaults to three grid cells of the
    /// mode search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_radius: Option<f64>,
}

fn default_w1_repeats() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub target: TargetConfig,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    pub particles: usize,
    pub init: InitConfig,
    pub outputs: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| SamplerError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file, returning it with its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = fs::read_to_string(path).map_err(|e| SamplerError::io(path, e))?;
        let cfg = Self::from_toml_str(&text)
            .map_err(|e| SamplerError::Config(format!("{}: {}", path.display(), strip_prefix(e))))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SamplerError::Config(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        self.sampler.validate()?;
        self.kernel
            .validate()
            .map_err(|e| SamplerError::Config(format!("kernel.bandwidth: {}", strip_prefix(e))))?;
        if self.particles == 0 {
            return Err(SamplerError::Config("particles: must be at least 1".into()));
        }
        if !(self.init.scale >= 0.0 && self.init.scale.is_finite()) {
            return Err(SamplerError::Config(format!(
                "init.scale: must be non-negative, got {}",
                self.init.scale
            )));
        }
        if self.outputs.snapshot_every == 0 {
            return Err(SamplerError::Config("outputs.snapshot_every: must be at least 1".into()));
        }
        if self.outputs.w1_repeats == 0 {
            return Err(SamplerError::Config("outputs.w1_repeats: must be at least 1".into()));
        }
        if let Some(r) = self.outputs.mode_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(SamplerError::Config(format!(
                    "outputs.mode_radius: must be positive, got {r}"
                )));
            }
        }
        Ok(())
    }

    /// Initial ensemble drawn from `N(init.mean, init.scale²·I)`.
    pub fn initial_ensemble(&self, dim: usize) -> Result<ParticleEnsemble> {
        if self.init.mean.len() != dim {
            return Err(SamplerError::Config(format!(
                "init.mean: expected {dim} entries for this target, got {}",
                self.init.mean.len()
            )));
        }
        ParticleEnsemble::gaussian(self.particles, &self.init.mean, self.init.scale, self.sampler.seed)
    }

    /// Output paths resolved against `base`, each opened for writing so an
    /// unwritable location fails before any sampling.
    pub fn prepare_outputs(&self, base: &Path) -> Result<(PathBuf, PathBuf)> {
        let trace = resolve(base, &self.outputs.trace_path);
        let summary = resolve(base, &self.outputs.summary_path);
        for path in [&trace, &summary] {
            check_writable(path)?;
        }
        Ok((trace, summary))
    }
}

pub(crate) fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

pub(crate) fn check_writable(path: &Path) -> Result<()> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map(drop)
        .map_err(|e| SamplerError::io(path, e))
}

fn strip_prefix(e: SamplerError) -> String {
    match e {
        SamplerError::Config(msg) | SamplerError::InvalidArgument(msg) => msg,
        other => other.to_string(),
    }
}
