//! Control-variate gradient estimators for the particle update: a SAGA
//! gradient table, SVRG anchors with full-gradient refresh, and SVRG⁺
//! anchors refreshed from a subsample.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SamplerError};
use crate::rng::{StreamRng, Streams};
use crate::samplers::{sample_batch, BatchMode, ParticleEnsemble};
use crate::target::{check_batch, check_point, minibatch_gradient_into, PotentialModel};

/// Which anchor SVRG refreshes to at an epoch boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SvrgOption {
    /// Anchor at a uniformly drawn position from the last `τ` steps and reset
    /// the live ensemble to it.
    I,
    /// Anchor at the current position.
    #[default]
    II,
}

fn check_particle(i: usize, m: usize) -> Result<()> {
    if i >= m {
        return Err(SamplerError::invalid(format!(
            "particle index {i} out of range for {m} particles"
        )));
    }
    Ok(())
}

fn check_inputs<M: PotentialModel + ?Sized>(
    model: &M,
    i: usize,
    m: usize,
    theta: &[f64],
    batch: &[usize],
) -> Result<()> {
    check_particle(i, m)?;
    check_point(model, theta)?;
    check_batch(model.num_terms(), batch)
}

/// Per-particle table of the most recent `Fⱼ` evaluations.
#[derive(Debug, Clone)]
pub struct SagaState {
    particles: usize,
    terms: usize,
    dim: usize,
    /// `[particle][term][coord]`, row-major.
    table: Vec<f64>,
    /// `[particle][coord]`: running `Σⱼ g(i, j)`.
    sums: Vec<f64>,
    initialized: bool,
}

impl SagaState {
    /// Allocates an `M×N×d` table, refusing if it exceeds `memory_budget` bytes.
    pub fn new(particles: usize, terms: usize, dim: usize, memory_budget: u64) -> Result<Self> {
        let entries = (particles as u128) * (terms as u128) * (dim as u128);
        let bytes = entries * std::mem::size_of::<f64>() as u128;
        if bytes > memory_budget as u128 {
            return Err(SamplerError::invalid(format!(
                "SAGA gradient table needs {bytes} bytes ({particles} particles x {terms} terms x {dim} dims), \
                 over the budget of {memory_budget} bytes"
            )));
        }
        Ok(Self {
            particles,
            terms,
            dim,
            table: vec![0.0; entries as usize],
            sums: vec![0.0; particles * dim],
            initialized: false,
        })
    }

    /// Fills the table with `Fⱼ(θ₀⁽ⁱ⁾)` for every particle and term.
    pub fn initialize<M: PotentialModel + ?Sized>(
        &mut self,
        model: &M,
        ensemble: &ParticleEnsemble,
    ) -> Result<()> {
        if ensemble.len() != self.particles || ensemble.dim() != self.dim {
            return Err(SamplerError::invalid("ensemble shape does not match the SAGA table"));
        }
        if model.num_terms() != self.terms || model.dim() != self.dim {
            return Err(SamplerError::invalid("model shape does not match the SAGA table"));
        }
        let (terms, dim) = (self.terms, self.dim);
        self.table
            .par_chunks_mut(terms * dim)
            .zip(self.sums.par_chunks_mut(dim))
            .enumerate()
            .for_each(|(i, (row, sum))| {
                let theta = ensemble.particle(i);
                sum.fill(0.0);
                for (j, g) in row.chunks_mut(dim).enumerate() {
                    model.term_gradient_into(j, theta, g);
                    for (s, v) in sum.iter_mut().zip(g.iter()) {
                        *s += v;
                    }
                }
            });
        self.initialized = true;
        Ok(())
    }

    fn ensure_ready(&self) -> Result<()> {
        if self.initialized {
            Ok(())
        } else {
            Err(SamplerError::State("SAGA gradient table is not initialized".into()))
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.terms + j) * self.dim;
        &self.table[start..start + self.dim]
    }

    pub fn cached_sum(&self, i: usize) -> &[f64] {
        &self.sums[i * self.dim..(i + 1) * self.dim]
    }

    /// `G⁽ⁱ⁾ = Σⱼ g(i,j) + (N/B)·Σ_{j∈batch} (Fⱼ(θ) − g(i,j))`. Does not
    /// modify the table.
    pub fn estimate<M: PotentialModel + ?Sized>(
        &self,
        i: usize,
        theta: &[f64],
        batch: &[usize],
        model: &M,
    ) -> Result<Vec<f64>> {
        self.ensure_ready()?;
        check_inputs(model, i, self.particles, theta, batch)?;
        let mut out = vec![0.0; self.dim];
        self.estimate_into(i, theta, batch, model, &mut out, &mut vec![0.0; self.dim]);
        Ok(out)
    }

    fn estimate_into<M: PotentialModel + ?Sized>(
        &self,
        i: usize,
        theta: &[f64],
        batch: &[usize],
        model: &M,
        out: &mut [f64],
        scratch: &mut [f64],
    ) {
        out.fill(0.0);
        for &j in batch {
            model.term_gradient_into(j, theta, scratch);
            for ((o, f), g) in out.iter_mut().zip(scratch.iter()).zip(self.entry(i, j)) {
                *o += f - g;
            }
        }
        let scale = self.terms as f64 / batch.len() as f64;
        for (o, s) in out.iter_mut().zip(self.cached_sum(i)) {
            *o = s + scale * *o;
        }
    }

    /// Stores `Fⱼ(θ)` for each distinct `j` in the batch, where `θ` is the
    /// position the step's gradient was evaluated at.
    pub fn commit<M: PotentialModel + ?Sized>(
        &mut self,
        i: usize,
        theta: &[f64],
        batch: &[usize],
        model: &M,
    ) -> Result<()> {
        self.ensure_ready()?;
        check_inputs(model, i, self.particles, theta, batch)?;
        let (terms, dim) = (self.terms, self.dim);
        let row = &mut self.table[i * terms * dim..(i + 1) * terms * dim];
        let sum = &mut self.sums[i * dim..(i + 1) * dim];
        commit_row(row, sum, theta, batch, model, dim);
        Ok(())
    }

    fn commit_all<M: PotentialModel + ?Sized>(
        &mut self,
        positions: &[f64],
        batches: &[Vec<usize>],
        model: &M,
    ) {
        let (terms, dim) = (self.terms, self.dim);
        self.table
            .par_chunks_mut(terms * dim)
            .zip(self.sums.par_chunks_mut(dim))
            .zip(batches.par_iter())
            .enumerate()
            .for_each(|(i, ((row, sum), batch))| {
                commit_row(row, sum, &positions[i * dim..(i + 1) * dim], batch, model, dim);
            });
    }

    /// Largest relative gap between a cached sum and its recomputation.
    pub fn audit(&self) -> f64 {
        (0..self.particles)
            .flat_map(|i| {
                (0..self.dim).map(move |c| {
                    let fresh: f64 = (0..self.terms).map(|j| self.entry(i, j)[c]).sum();
                    let cached = self.cached_sum(i)[c];
                    (cached - fresh).abs() / fresh.abs().max(1.0)
                })
            })
            .fold(0.0, f64::max)
    }
}

fn commit_row<M: PotentialModel + ?Sized>(
    row: &mut [f64],
    sum: &mut [f64],
    theta: &[f64],
    batch: &[usize],
    model: &M,
    dim: usize,
) {
    let mut distinct = batch.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut fresh = vec![0.0; dim];
    for j in distinct {
        model.term_gradient_into(j, theta, &mut fresh);
        let slot = &mut row[j * dim..(j + 1) * dim];
        for ((s, old), new) in sum.iter_mut().zip(slot.iter_mut()).zip(&fresh) {
            *s += new - *old;
            *old = *new;
        }
    }
}

/// Anchor positions `θ̃⁽ⁱ⁾` and their gradients `G̃⁽ⁱ⁾`, both `M×d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchors {
    pub positions: Vec<f64>,
    pub gradients: Vec<f64>,
    pub dim: usize,
}

impl Anchors {
    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn gradient(&self, i: usize) -> &[f64] {
        &self.gradients[i * self.dim..(i + 1) * self.dim]
    }

    fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    /// `G̃⁽ⁱ⁾ + (N/B)·Σ_{j∈batch} (Fⱼ(θ) − Fⱼ(θ̃⁽ⁱ⁾))`.
    fn estimate_into<M: PotentialModel + ?Sized>(
        &self,
        i: usize,
        theta: &[f64],
        batch: &[usize],
        model: &M,
        out: &mut [f64],
        scratch: &mut [f64],
    ) {
        out.fill(0.0);
        let anchor = self.position(i);
        for &j in batch {
            model.term_gradient_into(j, theta, scratch);
            for (o, f) in out.iter_mut().zip(scratch.iter()) {
                *o += f;
            }
            model.term_gradient_into(j, anchor, scratch);
            for (o, f) in out.iter_mut().zip(scratch.iter()) {
                *o -= f;
            }
        }
        let scale = model.num_terms() as f64 / batch.len() as f64;
        for (o, g) in out.iter_mut().zip(self.gradient(i)) {
            *o = g + scale * *o;
        }
    }

    fn estimate<M: PotentialModel + ?Sized>(
        &self,
        i: usize,
        theta: &[f64],
        batch: &[usize],
        model: &M,
    ) -> Result<Vec<f64>> {
        check_inputs(model, i, self.len(), theta, batch)?;
        let mut out = vec![0.0; self.dim];
        self.estimate_into(i, theta, batch, model, &mut out, &mut vec![0.0; self.dim]);
        Ok(out)
    }
}

fn check_epoch_boundary(step: u64, epoch_length: usize) -> Result<()> {
    if !step.is_multiple_of(epoch_length as u64) {
        return Err(SamplerError::State(format!(
            "snapshot requested at step {step}, which is not a multiple of the epoch length {epoch_length}"
        )));
    }
    Ok(())
}

/// SVRG anchors refreshed with full gradients every `τ` steps.
#[derive(Debug, Clone)]
pub struct SvrgState {
    option: SvrgOption,
    epoch_length: usize,
    anchors: Option<Anchors>,
    /// Option I only: the last `τ` ensembles as `(step, positions)`.
    history: VecDeque<(u64, Vec<f64>)>,
    last_lag: Option<u64>,
}

impl SvrgState {
    pub fn new(option: SvrgOption, epoch_length: usize) -> Result<Self> {
        if epoch_length == 0 {
            return Err(SamplerError::invalid("epoch length must be at least 1"));
        }
        Ok(Self {
            option,
            epoch_length,
            anchors: None,
            history: VecDeque::with_capacity(epoch_length),
            last_lag: None,
        })
    }

    pub fn option(&self) -> SvrgOption {
        self.option
    }

    pub fn epoch_length(&self) -> usize {
        self.epoch_length
    }

    pub fn anchors(&self) -> Option<&Anchors> {
        self.anchors.as_ref()
    }

    /// Lag `l` used by the most recent Option I snapshot, after clamping.
    pub fn last_lag(&self) -> Option<u64> {
        self.last_lag
    }

    /// Remembers the ensemble for Option I lookbacks. A no-op under Option II.
    pub fn record(&mut self, ensemble: &ParticleEnsemble) {
        if self.option != SvrgOption::I {
            return;
        }
        if let Some(back) = self.history.back_mut() {
            if back.0 == ensemble.step() {
                back.1.copy_from_slice(ensemble.positions());
                return;
            }
        }
        if self.history.len() == self.epoch_length {
            self.history.pop_front();
        }
        self.history
            .push_back((ensemble.step(), ensemble.positions().to_vec()));
    }

    /// Refreshes the anchors at an epoch boundary. Option I draws
    /// `l ~ U{0,…,τ−1}` from `rng`, clamps it to the recorded history, resets
    /// the live ensemble to `θ_{k−l}` and anchors there; Option II anchors at
    /// the current positions.
    pub fn snapshot<M: PotentialModel + ?Sized>(
        &mut self,
        ensemble: &mut ParticleEnsemble,
        model: &M,
        rng: &mut StreamRng,
    ) -> Result<()> {
        let lag = match self.option {
            SvrgOption::I => rng.random_range(0..self.epoch_length as u64),
            SvrgOption::II => 0,
        };
        self.snapshot_with_lag(ensemble, model, lag)
    }

    /// [`SvrgState::snapshot`] with a caller-chosen Option I lag.
    pub fn snapshot_with_lag<M: PotentialModel + ?Sized>(
        &mut self,
        ensemble: &mut ParticleEnsemble,
        model: &M,
        lag: u64,
    ) -> Result<()> {
        let k = ensemble.step();
        check_epoch_boundary(k, self.epoch_length)?;
        if self.option == SvrgOption::I {
            self.record(ensemble);
            let available = self.history.len() as u64 - 1;
            let mut l = lag.min(self.epoch_length as u64 - 1);
            if l > available {
                log::debug!("svrg option I: lag {l} exceeds available history at step {k}, clamping to {available}");
                l = available;
            }
            let idx = self.history.len() - 1 - l as usize;
            let (step, positions) = &self.history[idx];
            debug_assert_eq!(*step, k - l);
            ensemble.positions_mut().copy_from_slice(positions);
            self.record(ensemble);
            self.last_lag = Some(l);
        }
        self.anchors = Some(full_anchors(ensemble, model));
        Ok(())
    }

    pub fn estimate<M: PotentialModel + ?Sized>(
        &self,
        i: usize,
        theta: &[f64],
        batch: &[usize],
        model: &M,
    ) -> Result<Vec<f64>> {
        self.anchors
            .as_ref()
            .ok_or_else(|| SamplerError::State("SVRG estimate requested before any snapshot".into()))?
            .estimate(i, theta, batch, model)
    }
}

fn full_anchors<M: PotentialModel + ?Sized>(ensemble: &ParticleEnsemble, model: &M) -> Anchors {
    let dim = ensemble.dim();
    let positions = ensemble.positions().to_vec();
    let mut gradients = vec![0.0; positions.len()];
    gradients
        .par_chunks_mut(dim)
        .zip(positions.par_chunks(dim))
        .for_each(|(g, theta)| model.full_gradient_into(theta, g));
    Anchors {
        positions,
        gradients,
        dim,
    }
}

/// SVRG anchors refreshed from a size-`b` subsample instead of full gradients.
#[derive(Debug, Clone)]
pub struct SvrgPlusState {
    epoch_length: usize,
    snapshot_batch: usize,
    anchors: Option<Anchors>,
}

impl SvrgPlusState {
    pub fn new(epoch_length: usize, snapshot_batch: usize) -> Result<Self> {
        if epoch_length == 0 {
            return Err(SamplerError::invalid("epoch length must be at least 1"));
        }
        if snapshot_batch == 0 {
            return Err(SamplerError::invalid("snapshot batch size b must be at least 1"));
        }
        Ok(Self {
            epoch_length,
            snapshot_batch,
            anchors: None,
        })
    }

    pub fn epoch_length(&self) -> usize {
        self.epoch_length
    }

    pub fn anchors(&self) -> Option<&Anchors> {
        self.anchors.as_ref()
    }

    /// Anchors at the current positions with `G̃⁽ⁱ⁾ = (N/b)·Σ_{j∈J} Fⱼ(θ⁽ⁱ⁾)`.
    /// `J` is drawn per particle from its own stream, or once from the
    /// control stream under [`BatchMode::Shared`].
    pub fn snapshot<M: PotentialModel + ?Sized>(
        &mut self,
        ensemble: &ParticleEnsemble,
        model: &M,
        streams: &mut Streams,
        mode: BatchMode,
    ) -> Result<()> {
        check_epoch_boundary(ensemble.step(), self.epoch_length)?;
        if streams.particles.len() != ensemble.len() {
            return Err(SamplerError::invalid("one random stream per particle is required"));
        }
        let n = model.num_terms();
        let b = self.snapshot_batch;
        let shared = match mode {
            BatchMode::Shared => Some(sample_batch(n, b, &mut streams.control)?),
            BatchMode::PerParticle => None,
        };
        let dim = ensemble.dim();
        let positions = ensemble.positions().to_vec();
        let mut gradients = vec![0.0; positions.len()];
        gradients
            .par_chunks_mut(dim)
            .zip(positions.par_chunks(dim))
            .zip(streams.particles.par_iter_mut())
            .try_for_each(|((g, theta), rng)| -> Result<()> {
                let own;
                let batch = match &shared {
                    Some(s) => &s.indices,
                    None => {
                        own = sample_batch(n, b, rng)?;
                        &own.indices
                    }
                };
                minibatch_gradient_into(model, theta, batch, g, &mut vec![0.0; dim]);
                Ok(())
            })?;
        self.anchors = Some(Anchors {
            positions,
            gradients,
            dim,
        });
        Ok(())
    }

    pub fn estimate<M: PotentialModel + ?Sized>(
        &self,
        i: usize,
        theta: &[f64],
        batch: &[usize],
        model: &M,
    ) -> Result<Vec<f64>> {
        self.anchors
            .as_ref()
            .ok_or_else(|| SamplerError::State("SVRG+ estimate requested before any snapshot".into()))?
            .estimate(i, theta, batch, model)
    }
}

/// Source of the per-particle gradient `G⁽ⁱ⁾` fed to the particle update.
#[derive(Debug, Clone)]
pub enum GradientEstimator {
    Minibatch,
    Saga(SagaState),
    Svrg(SvrgState),
    SvrgPlus(SvrgPlusState),
}

impl GradientEstimator {
    /// Epoch-boundary work that must finish before any particle moves.
    pub(crate) fn before_step<M: PotentialModel + ?Sized>(
        &mut self,
        ensemble: &mut ParticleEnsemble,
        model: &M,
        streams: &mut Streams,
        mode: BatchMode,
    ) -> Result<()> {
        let k = ensemble.step();
        match self {
            GradientEstimator::Svrg(s) if k.is_multiple_of(s.epoch_length as u64) => {
                s.snapshot(ensemble, model, &mut streams.control)
            }
            GradientEstimator::SvrgPlus(s) if k.is_multiple_of(s.epoch_length as u64) => {
                s.snapshot(ensemble, model, streams, mode)
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn estimate_into<M: PotentialModel + ?Sized>(
        &self,
        i: usize,
        theta: &[f64],
        batch: &[usize],
        model: &M,
        out: &mut [f64],
        scratch: &mut [f64],
    ) {
        match self {
            GradientEstimator::Minibatch => minibatch_gradient_into(model, theta, batch, out, scratch),
            GradientEstimator::Saga(s) => s.estimate_into(i, theta, batch, model, out, scratch),
            GradientEstimator::Svrg(s) => s
                .anchors
                .as_ref()
                .expect("snapshot taken at step 0")
                .estimate_into(i, theta, batch, model, out, scratch),
            GradientEstimator::SvrgPlus(s) => s
                .anchors
                .as_ref()
                .expect("snapshot taken at step 0")
                .estimate_into(i, theta, batch, model, out, scratch),
        }
    }

    /// Bookkeeping once the step is accepted. `previous` holds the positions
    /// the step's gradients were evaluated at.
    pub(crate) fn after_step<M: PotentialModel + ?Sized>(
        &mut self,
        previous: &[f64],
        batches: &[Vec<usize>],
        updated: &ParticleEnsemble,
        model: &M,
    ) {
        match self {
            GradientEstimator::Saga(s) => s.commit_all(previous, batches, model),
            GradientEstimator::Svrg(s) => s.record(updated),
            _ => {}
        }
    }
}
