//! Particle samplers: SGLD, SVGD, SPOS and the variance-reduced SPOS
//! variants, all advancing a [`ParticleEnsemble`] synchronously.

mod engine;
mod ensemble;
mod run;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use engine::{sgld_step, spos_step, svgd_step, Sampler};
pub use ensemble::ParticleEnsemble;
pub use run::{run, DiagnosticsConfig};

use crate::error::{Result, SamplerError};
use crate::rng::StreamRng;
use crate::variance_reduction::SvrgOption;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerKind {
    #[serde(rename = "sgld")]
    Sgld,
    #[serde(rename = "svgd")]
    Svgd,
    #[serde(rename = "spos")]
    Spos,
    #[serde(rename = "saga-pos")]
    SagaPos,
    #[serde(rename = "svrg-pos")]
    SvrgPos,
    #[serde(rename = "svrg-pos+")]
    SvrgPosPlus,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Sgld => "sgld",
            SamplerKind::Svgd => "svgd",
            SamplerKind::Spos => "spos",
            SamplerKind::SagaPos => "saga-pos",
            SamplerKind::SvrgPos => "svrg-pos",
            SamplerKind::SvrgPosPlus => "svrg-pos+",
        }
    }

    /// Whether the update injects Gaussian noise and the `β⁻¹G` drift.
    pub fn is_langevin(self) -> bool {
        self != SamplerKind::Svgd
    }

    /// Whether the update includes the kernel interaction.
    pub fn is_interacting(self) -> bool {
        self != SamplerKind::Sgld
    }
}

/// Step size `h_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant { h0: f64 },
    /// `h_k = h0·(k+1)^(−gamma)`.
    Polynomial { h0: f64, gamma: f64 },
}

impl StepSchedule {
    pub fn at(&self, step: u64) -> f64 {
        match *self {
            StepSchedule::Constant { h0 } => h0,
            StepSchedule::Polynomial { h0, gamma } => h0 * ((step + 1) as f64).powf(-gamma),
        }
    }

    fn validate(&self) -> Result<()> {
        let (h0, gamma) = match *self {
            StepSchedule::Constant { h0 } => (h0, 0.0),
            StepSchedule::Polynomial { h0, gamma } => (h0, gamma),
        };
        if !(h0 > 0.0 && h0.is_finite()) {
            return Err(SamplerError::Config(format!(
                "sampler.step_size.h0: must be positive, got {h0}"
            )));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(SamplerError::Config(format!(
                "sampler.step_size.gamma: must be non-negative, got {gamma}"
            )));
        }
        Ok(())
    }
}

/// Whether minibatches are drawn per particle or once per step for all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BatchMode {
    #[default]
    PerParticle,
    Shared,
}

fn default_noise_scale() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_saga_budget() -> u64 {
    1 << 30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub step_size: StepSchedule,
    pub beta: f64,
    pub batch_size: usize,
    pub total_steps: u64,
    pub seed: u64,
    /// `τ`, required by the SVRG variants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch_length: Option<usize>,
    /// `b`, required by SVRG-POS⁺.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_batch: Option<usize>,
    #[serde(default)]
    pub svrg_option: SvrgOption,
    #[serde(default)]
    pub batch_mode: BatchMode,
    /// Multiplier on the injected noise, in `[0, 1]`.
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
    /// When false, the `β⁻¹G` Langevin drift is dropped.
    #[serde(default = "default_true")]
    pub langevin_drift: bool,
    /// Upper bound in bytes on the SAGA gradient table.
    #[serde(default = "default_saga_budget")]
    pub saga_memory_budget: u64,
}

impl SamplerConfig {
    /// Constant step size, per-particle batches, Option II and no overrides.
    pub fn new(kind: SamplerKind, h0: f64, beta: f64, batch_size: usize, total_steps: u64, seed: u64) -> Self {
        Self {
            kind,
            step_size: StepSchedule::Constant { h0 },
            beta,
            batch_size,
            total_steps,
            seed,
            epoch_length: None,
            snapshot_batch: None,
            svrg_option: SvrgOption::default(),
            batch_mode: BatchMode::default(),
            noise_scale: 1.0,
            langevin_drift: true,
            saga_memory_budget: default_saga_budget(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.step_size.validate()?;
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(SamplerError::Config(format!(
                "sampler.beta: must be positive, got {}",
                self.beta
            )));
        }
        if self.batch_size == 0 {
            return Err(SamplerError::Config("sampler.batch_size: must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.noise_scale) {
            return Err(SamplerError::Config(format!(
                "sampler.noise_scale: must lie in [0, 1], got {}",
                self.noise_scale
            )));
        }
        if matches!(self.kind, SamplerKind::SvrgPos | SamplerKind::SvrgPosPlus) {
            match self.epoch_length {
                Some(t) if t >= 1 => {}
                _ => {
                    return Err(SamplerError::Config(format!(
                        "sampler.epoch_length: required and at least 1 for {}",
                        self.kind.name()
                    )))
                }
            }
        }
        if self.kind == SamplerKind::SvrgPosPlus {
            match self.snapshot_batch {
                Some(b) if b >= 1 => {}
                _ => {
                    return Err(SamplerError::Config(
                        "sampler.snapshot_batch: required and at least 1 for svrg-pos+".into(),
                    ))
                }
            }
        }
        Ok(())
    }
}

/// A size-`B` multiset of term indices drawn with replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchDraw {
    pub indices: Vec<usize>,
}

/// `B` i.i.d. uniform draws from `{0, …, N−1}`.
pub fn sample_batch(num_terms: usize, batch_size: usize, rng: &mut StreamRng) -> Result<BatchDraw> {
    if num_terms == 0 {
        return Err(SamplerError::invalid("cannot draw a batch from zero terms"));
    }
    if batch_size == 0 {
        return Err(SamplerError::invalid("batch size must be at least 1"));
    }
    Ok(BatchDraw {
        indices: (0..batch_size).map(|_| rng.random_range(0..num_terms)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn single_term_batches() {
        let b = sample_batch(1, 3, &mut rng::stream(0, 1)).unwrap();
        assert_eq!(b.indices, vec![0, 0, 0]);
        assert!(sample_batch(0, 3, &mut rng::stream(0, 1)).is_err());
    }

    #[test]
    fn batches_reproducible() {
        let a = sample_batch(5, 5, &mut rng::stream(42, 3)).unwrap();
        let b = sample_batch(5, 5, &mut rng::stream(42, 3)).unwrap();
        assert_eq!(a, b);
        assert!(a.indices.iter().all(|&j| j < 5));
    }

    #[test]
    fn batch_frequencies_within_binomial_band() {
        let draws = 30_000;
        let mut rng = rng::stream(9, 1);
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            counts[sample_batch(3, 1, &mut rng).unwrap().indices[0]] += 1;
        }
        let p = 1.0 / 3.0;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() <= 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn schedules() {
        assert_eq!(StepSchedule::Constant { h0: 0.1 }.at(1000), 0.1);
        let p = StepSchedule::Polynomial { h0: 0.1, gamma: 0.5 };
        assert_eq!(p.at(0), 0.1);
        assert!((p.at(3) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn config_validation_names_fields() {
        let mut cfg = SamplerConfig::new(SamplerKind::Spos, 0.1, -1.0, 1, 10, 0);
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("sampler.beta"), "{err}");
        cfg.beta = 1.0;
        cfg.validate().unwrap();
        cfg.kind = SamplerKind::SvrgPos;
        assert!(cfg.validate().unwrap_err().to_string().contains("epoch_length"));
        cfg.epoch_length = Some(5);
        cfg.validate().unwrap();
        cfg.kind = SamplerKind::SvrgPosPlus;
        assert!(cfg.validate().unwrap_err().to_string().contains("snapshot_batch"));
        cfg.noise_scale = 2.0;
        cfg.snapshot_batch = Some(2);
        assert!(cfg.validate().unwrap_err().to_string().contains("noise_scale"));
    }
}
