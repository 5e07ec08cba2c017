//! RBF interaction kernel `K(δ) = exp(−‖δ‖²/2η²)` and bandwidth selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SamplerError};
use crate::samplers::ParticleEnsemble;

/// How the bandwidth `η` is chosen each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    /// Recomputed from the current ensemble before every step.
    #[default]
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct KernelConfig {
    #[serde(default)]
    pub bandwidth: Bandwidth,
}

impl KernelConfig {
    pub fn fixed(eta: f64) -> Self {
        Self {
            bandwidth: Bandwidth::Fixed(eta),
        }
    }

    pub fn median() -> Self {
        Self {
            bandwidth: Bandwidth::Median,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.bandwidth {
            Bandwidth::Fixed(eta) => check_bandwidth(eta),
            Bandwidth::Median => Ok(()),
        }
    }

    /// Bandwidth to use for the given ensemble state.
    pub fn resolve(&self, ensemble: &ParticleEnsemble) -> Result<f64> {
        match self.bandwidth {
            Bandwidth::Fixed(eta) => check_bandwidth(eta).map(|_| eta),
            Bandwidth::Median => median_bandwidth(ensemble),
        }
    }
}

fn check_bandwidth(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(SamplerError::invalid(format!(
            "kernel bandwidth must be positive and finite, got {eta}"
        )))
    }
}

#[inline]
fn squared_norm(delta: &[f64]) -> f64 {
    delta.iter().map(|v| v * v).sum()
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `K(δ) = exp(−‖δ‖²/(2η²))`.
pub fn kernel_value(delta: &[f64], eta: f64) -> Result<f64> {
    check_bandwidth(eta)?;
    Ok((-squared_norm(delta) / (2.0 * eta * eta)).exp())
}

/// `∇K(δ) = −(δ/η²)·K(δ)`, the gradient with respect to the difference.
pub fn kernel_gradient(delta: &[f64], eta: f64) -> Result<Vec<f64>> {
    let k = kernel_value(delta, eta)?;
    let inv = 1.0 / (eta * eta);
    Ok(delta.iter().map(|d| -d * inv * k).collect())
}

/// Median heuristic: `η² = med²/(2·ln M)` over all pairwise Euclidean
/// distances `i < j`. Falls back to `η = 1` when the median is zero or `M < 2`.
pub fn median_bandwidth(ensemble: &ParticleEnsemble) -> Result<f64> {
    let m = ensemble.len();
    if m < 1 {
        return Err(SamplerError::invalid("median bandwidth needs at least one particle"));
    }
    if m < 2 {
        return Ok(1.0);
    }
    let mut dists: Vec<f64> = (0..m)
        .flat_map(|i| {
            let a = ensemble.particle(i);
            (i + 1..m).map(move |j| squared_distance(a, ensemble.particle(j)).sqrt())
        })
        .collect();
    let med = median_in_place(&mut dists);
    let log_m = (m as f64).ln();
    if med <= 0.0 || log_m <= 0.0 {
        return Ok(1.0);
    }
    Ok((med * med / (2.0 * log_m)).sqrt())
}

/// Median of a non-empty slice; averages the two middle order statistics for
/// even lengths.
fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (lower, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    }
}

/// Stein interaction for every particle:
/// `(1/M)·Σⱼ [ −K(θᵢ−θⱼ)·Gⱼ + ∇K(θⱼ−θᵢ) ]`.
///
/// The second term is the gradient of the kernel with respect to the
/// summed-over particle `θⱼ`, which pushes particle `i` away from `j`.
/// Each row sums `j` in index order, so results do not depend on how rows
/// are split across workers.
pub fn stein_interaction(positions: &[f64], grads: &[f64], dim: usize, eta: f64) -> Vec<f64> {
    let m = positions.len() / dim;
    let inv_eta2 = 1.0 / (eta * eta);
    let inv_m = 1.0 / m as f64;
    let mut out = vec![0.0; positions.len()];
    out.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
        let xi = &positions[i * dim..(i + 1) * dim];
        for j in 0..m {
            let xj = &positions[j * dim..(j + 1) * dim];
            let gj = &grads[j * dim..(j + 1) * dim];
            let k = (-squared_distance(xi, xj) * 0.5 * inv_eta2).exp();
            for c in 0..dim {
                row[c] += -k * gj[c] + (xi[c] - xj[c]) * inv_eta2 * k;
            }
        }
        for v in row.iter_mut() {
            *v *= inv_m;
        }
    });
    out
}
