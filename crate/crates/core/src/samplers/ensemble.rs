use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SamplerError};
use crate::rng::{self, INIT_STREAM};

/// `M` particles in `ℝᵈ`, stored row-major, plus the step counter `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
    dim: usize,
    step: u64,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(SamplerError::invalid("particle dimension must be positive"));
        }
        if positions.is_empty() || !positions.len().is_multiple_of(dim) {
            return Err(SamplerError::invalid(format!(
                "{} coordinates do not form a non-empty ensemble of dimension {dim}",
                positions.len()
            )));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(SamplerError::invalid("particle coordinates must be finite"));
        }
        Ok(Self {
            positions,
            dim,
            step: 0,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(SamplerError::invalid("particle rows have differing lengths"));
        }
        Self::new(rows.concat(), dim)
    }

    /// `M` draws from `N(mean, scale²·I)` on the initialization stream of `seed`.
    pub fn gaussian(particles: usize, mean: &[f64], scale: f64, seed: u64) -> Result<Self> {
        if particles == 0 {
            return Err(SamplerError::invalid("need at least one particle"));
        }
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(SamplerError::invalid("initialization scale must be non-negative"));
        }
        let mut rng = rng::stream(seed, INIT_STREAM);
        let positions = (0..particles)
            .flat_map(|_| mean.to_vec())
            .map(|m| {
                let z: f64 = StandardNormal.sample(&mut rng);
                m + scale * z
            })
            .collect();
        Self::new(positions, mean.len())
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particles(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks(self.dim)
    }

    /// Values of coordinate `c` across all particles.
    pub fn coordinate(&self, c: usize) -> Vec<f64> {
        self.particles().map(|p| p[c]).collect()
    }

    /// Ensemble whose particle `i` is this ensemble's particle `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let positions = order.iter().flat_map(|&i| self.particle(i).to_vec()).collect();
        Self {
            positions,
            dim: self.dim,
            step: self.step,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_validation() {
        assert!(ParticleEnsemble::new(vec![], 1).is_err());
        assert!(ParticleEnsemble::new(vec![1.0, 2.0, 3.0], 2).is_err());
        assert!(ParticleEnsemble::new(vec![1.0, f64::INFINITY], 1).is_err());
        let e = ParticleEnsemble::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e.particle(1), &[3.0, 4.0]);
        assert_eq!(e.coordinate(0), vec![1.0, 3.0]);
        assert_eq!(e.permuted(&[1, 0]).particle(0), &[3.0, 4.0]);
    }

    #[test]
    fn gaussian_init_is_seeded() {
        let a = ParticleEnsemble::gaussian(5, &[1.0, -1.0], 0.5, 3).unwrap();
        let b = ParticleEnsemble::gaussian(5, &[1.0, -1.0], 0.5, 3).unwrap();
        let c = ParticleEnsemble::gaussian(5, &[1.0, -1.0], 0.5, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.dim(), 2);
    }
}
