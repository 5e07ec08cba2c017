use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{sample_batch, BatchMode, ParticleEnsemble, SamplerConfig, SamplerKind};
use crate::error::{Result, SamplerError};
use crate::kernel::{stein_interaction, KernelConfig};
use crate::rng::Streams;
use crate::target::PotentialModel;
use crate::variance_reduction::{GradientEstimator, SagaState, SvrgPlusState, SvrgState};

/// A configured sampler bound to a model. Owns the random streams and any
/// variance-reduction state, and advances an ensemble one step at a time.
pub struct Sampler<'m, M: PotentialModel + ?Sized> {
    model: &'m M,
    config: SamplerConfig,
    kernel: KernelConfig,
    streams: Streams,
    estimator: GradientEstimator,
}

impl<'m, M: PotentialModel + ?Sized> Sampler<'m, M> {
    pub fn new(
        model: &'m M,
        config: SamplerConfig,
        kernel: KernelConfig,
        initial: &ParticleEnsemble,
    ) -> Result<Self> {
        config.validate()?;
        kernel.validate()?;
        check_model(model, initial)?;
        let estimator = match config.kind {
            SamplerKind::SagaPos => {
                let mut saga = SagaState::new(
                    initial.len(),
                    model.num_terms(),
                    model.dim(),
                    config.saga_memory_budget,
                )?;
                saga.initialize(model, initial)?;
                GradientEstimator::Saga(saga)
            }
            SamplerKind::SvrgPos => {
                let mut svrg = SvrgState::new(config.svrg_option, config.epoch_length.unwrap_or(1))?;
                svrg.record(initial);
                GradientEstimator::Svrg(svrg)
            }
            SamplerKind::SvrgPosPlus => GradientEstimator::SvrgPlus(SvrgPlusState::new(
                config.epoch_length.unwrap_or(1),
                config.snapshot_batch.unwrap_or(1),
            )?),
            _ => GradientEstimator::Minibatch,
        };
        Ok(Self {
            model,
            streams: Streams::new(config.seed, initial.len()),
            config,
            kernel,
            estimator,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn estimator(&self) -> &GradientEstimator {
        &self.estimator
    }

    /// Applies one update in place and increments the step counter.
    pub fn step(&mut self, ensemble: &mut ParticleEnsemble) -> Result<()> {
        advance(
            ensemble,
            self.model,
            &self.config,
            &self.kernel,
            &mut self.streams,
            &mut self.estimator,
        )
    }
}

fn check_model<M: PotentialModel + ?Sized>(model: &M, ensemble: &ParticleEnsemble) -> Result<()> {
    if model.dim() != ensemble.dim() {
        return Err(SamplerError::invalid(format!(
            "ensemble dimension {} does not match model dimension {}",
            ensemble.dim(),
            model.dim()
        )));
    }
    if model.num_terms() == 0 {
        return Err(SamplerError::invalid("model has no gradient terms"));
    }
    Ok(())
}

fn plain_step<M: PotentialModel + ?Sized>(
    ensemble: &ParticleEnsemble,
    model: &M,
    config: &SamplerConfig,
    kernel: &KernelConfig,
    streams: &mut Streams,
    expected: SamplerKind,
) -> Result<ParticleEnsemble> {
    if config.kind != expected {
        return Err(SamplerError::invalid(format!(
            "{} step called with a {} config",
            expected.name(),
            config.kind.name()
        )));
    }
    config.validate()?;
    kernel.validate()?;
    check_model(model, ensemble)?;
    let mut next = ensemble.clone();
    advance(&mut next, model, config, kernel, streams, &mut GradientEstimator::Minibatch)?;
    Ok(next)
}

/// One SGLD step: `θ′ = θ − (h/β)·G + √(2h/β)·ξ` for each particle on its own.
pub fn sgld_step<M: PotentialModel + ?Sized>(
    ensemble: &ParticleEnsemble,
    model: &M,
    config: &SamplerConfig,
    streams: &mut Streams,
) -> Result<ParticleEnsemble> {
    plain_step(ensemble, model, config, &KernelConfig::default(), streams, SamplerKind::Sgld)
}

/// One SVGD step: `θᵢ′ = θᵢ + (h/M)·Σ_q [−K(θ_q−θᵢ)·G_q + ∇_{θ_q}K(θ_q−θᵢ)]`.
pub fn svgd_step<M: PotentialModel + ?Sized>(
    ensemble: &ParticleEnsemble,
    model: &M,
    config: &SamplerConfig,
    kernel: &KernelConfig,
    streams: &mut Streams,
) -> Result<ParticleEnsemble> {
    plain_step(ensemble, model, config, kernel, streams, SamplerKind::Svgd)
}

/// One SPOS step: the SVGD interaction plus the Langevin drift `−(h/β)·Gᵢ`
/// and noise `√(2h/β)·ξᵢ`.
pub fn spos_step<M: PotentialModel + ?Sized>(
    ensemble: &ParticleEnsemble,
    model: &M,
    config: &SamplerConfig,
    kernel: &KernelConfig,
    streams: &mut Streams,
) -> Result<ParticleEnsemble> {
    plain_step(ensemble, model, config, kernel, streams, SamplerKind::Spos)
}

/// Shared step driver. Reads only step-`k` positions and writes a fresh
/// buffer, so the result is independent of how particles are scheduled.
fn advance<M: PotentialModel + ?Sized>(
    ensemble: &mut ParticleEnsemble,
    model: &M,
    config: &SamplerConfig,
    kernel: &KernelConfig,
    streams: &mut Streams,
    estimator: &mut GradientEstimator,
) -> Result<()> {
    if streams.particles.len() != ensemble.len() {
        return Err(SamplerError::invalid(format!(
            "{} random streams for {} particles",
            streams.particles.len(),
            ensemble.len()
        )));
    }
    let k = ensemble.step();
    estimator.before_step(ensemble, model, streams, config.batch_mode)?;

    let h = config.step_size.at(k);
    let dim = ensemble.dim();
    let terms = model.num_terms();
    let batch_size = config.batch_size;
    let langevin = config.kind.is_langevin();
    let shared = match config.batch_mode {
        BatchMode::Shared => Some(sample_batch(terms, batch_size, &mut streams.control)?),
        BatchMode::PerParticle => None,
    };

    let mut grads = vec![0.0; ensemble.positions().len()];
    let draws: Vec<(Vec<usize>, Vec<f64>)> = {
        let ens: &ParticleEnsemble = ensemble;
        let est: &GradientEstimator = estimator;
        grads
            .par_chunks_mut(dim)
            .zip(streams.particles.par_iter_mut())
            .enumerate()
            .map(|(i, (g, rng))| {
                let batch = match &shared {
                    Some(b) => b.indices.clone(),
                    None => sample_batch(terms, batch_size, rng)
                        .expect("validated batch parameters")
                        .indices,
                };
                est.estimate_into(i, ens.particle(i), &batch, model, g, &mut vec![0.0; dim]);
                let noise = if langevin {
                    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
                } else {
                    Vec::new()
                };
                (batch, noise)
            })
            .collect()
    };

    let interaction = if config.kind.is_interacting() {
        let eta = kernel.resolve(ensemble)?;
        Some(stein_interaction(ensemble.positions(), &grads, dim, eta))
    } else {
        None
    };

    let drift = if config.langevin_drift { h / config.beta } else { 0.0 };
    let diffusion = (2.0 * h / config.beta).sqrt() * config.noise_scale;
    let previous = ensemble.positions();
    let mut next = previous.to_vec();
    next.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
        let g = &grads[i * dim..(i + 1) * dim];
        for c in 0..dim {
            let mut x = row[c];
            if let Some(inter) = &interaction {
                x += h * inter[i * dim + c];
            }
            if langevin {
                x -= drift * g[c];
                x += diffusion * draws[i].1[c];
            }
            row[c] = x;
        }
    });

    if let Some(bad) = next.chunks(dim).position(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(SamplerError::Divergence {
            step: k,
            particle: bad,
        });
    }

    let previous = std::mem::replace(ensemble, ParticleEnsemble::new(next, dim)?);
    ensemble.set_step(k + 1);
    let batches: Vec<Vec<usize>> = draws.into_iter().map(|(b, _)| b).collect();
    estimator.after_step(previous.positions(), &batches, ensemble, model);
    Ok(())
}
