use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SamplerError};
use crate::rng::StreamRng;
use crate::target::PotentialModel;

/// Exact W₁ between two equal-size empirical measures on ℝ:
/// `(1/m)·Σᵢ |a₍ᵢ₎ − b₍ᵢ₎|` over sorted order statistics.
pub fn w1_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(SamplerError::invalid("W1 needs non-empty samples"));
    }
    if a.len() != b.len() {
        return Err(SamplerError::invalid(format!(
            "W1 needs equal sample sizes, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(SamplerError::invalid("W1 samples must be finite"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let total: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    Ok(total / a.len() as f64)
}

/// Draws exact i.i.d. samples from a one-dimensional reference law.
pub trait ReferenceSampler: Send + Sync {
    fn sample(&self, rng: &mut StreamRng, m: usize) -> Vec<f64>;
}

/// Median over `repeats` of `w1_1d(samples, fresh reference draws)`.
pub fn w1_vs_reference(
    samples: &[f64],
    reference: &dyn ReferenceSampler,
    rng: &mut StreamRng,
    repeats: usize,
) -> Result<f64> {
    if repeats == 0 {
        return Err(SamplerError::invalid("repeats must be at least 1"));
    }
    let mut values = (0..repeats)
        .map(|_| w1_1d(samples, &reference.sample(rng, samples.len())))
        .collect::<Result<Vec<_>>>()?;
    values.sort_unstable_by(f64::total_cmp);
    let mid = values.len() / 2;
    Ok(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalReference {
    pub mean: f64,
    pub std: f64,
}

impl NormalReference {
    pub fn new(mean: f64, std: f64) -> Self {
        Self { mean, std }
    }
}

impl ReferenceSampler for NormalReference {
    fn sample(&self, rng: &mut StreamRng, m: usize) -> Vec<f64> {
        (0..m)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                self.mean + self.std * z
            })
            .collect()
    }
}

/// Inverse-CDF sampler for a 1-D density `∝ exp(−U)` tabulated on a uniform
/// grid, with trapezoidal cumulative mass and linear interpolation.
#[derive(Debug, Clone)]
pub struct GridReference {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridReference {
    pub fn from_potential<M: PotentialModel + ?Sized>(
        model: &M,
        lo: f64,
        hi: f64,
        points: usize,
    ) -> Result<Self> {
        if model.dim() != 1 {
            return Err(SamplerError::UnsupportedTarget(
                "grid references need a one-dimensional target".into(),
            ));
        }
        if !(lo < hi) || points < 2 {
            return Err(SamplerError::invalid("grid needs lo < hi and at least 2 points"));
        }
        let step = (hi - lo) / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
        let potentials = grid
            .iter()
            .map(|&x| {
                model.potential(&[x]).ok_or_else(|| {
                    SamplerError::UnsupportedTarget("target does not expose its potential".into())
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let floor = potentials.iter().cloned().fold(f64::INFINITY, f64::min);
        let density: Vec<f64> = potentials.iter().map(|u| (floor - u).exp()).collect();
        let mut cdf = Vec::with_capacity(points);
        cdf.push(0.0);
        for w in density.windows(2) {
            let last = *cdf.last().unwrap();
            cdf.push(last + 0.5 * (w[0] + w[1]) * step);
        }
        let total = *cdf.last().unwrap();
        if !(total > 0.0 && total.is_finite()) {
            return Err(SamplerError::invalid("density has no mass on the grid"));
        }
        for v in cdf.iter_mut() {
            *v /= total;
        }
        Ok(Self { grid, cdf })
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let idx = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        let (x0, x1) = (self.grid[idx - 1], self.grid[idx]);
        if c1 > c0 {
            x0 + (u - c0) / (c1 - c0) * (x1 - x0)
        } else {
            x0
        }
    }
}

impl ReferenceSampler for GridReference {
    fn sample(&self, rng: &mut StreamRng, m: usize) -> Vec<f64> {
        (0..m).map(|_| self.quantile(rng.random::<f64>())).collect()
    }
}
