use serde::{Deserialize, Serialize};

use crate::error::{Result, SamplerError};
use crate::samplers::ParticleEnsemble;
use crate::target::PotentialModel;

/// Sorted 1-D mode locations with a capture radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub locations: Vec<f64>,
    pub radius: f64,
}

impl ModeSet {
    pub fn new(locations: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(SamplerError::invalid(format!("mode radius must be positive, got {radius}")));
        }
        if locations.iter().any(|x| !x.is_finite()) {
            return Err(SamplerError::invalid("mode locations must be finite"));
        }
        if locations.windows(2).any(|w| w[1] - w[0] <= 2.0 * radius) {
            return Err(SamplerError::invalid(format!(
                "modes must be increasing and more than 2·radius = {} apart",
                2.0 * radius
            )));
        }
        Ok(Self { locations, radius })
    }

    /// Same locations under a different capture radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::new(self.locations.clone(), radius)
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if (b - a).abs() <= 1e-12 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Interior local maxima of `exp(−U)` on a `resolution`-point grid over
/// `[lo, hi]` that exceed 1% of the grid peak, each refined by golden-section
/// search within its neighbouring cells. The radius is three grid cells;
/// maxima closer than two radii keep only the higher one.
pub fn find_modes_grid<M: PotentialModel + ?Sized>(
    model: &M,
    lo: f64,
    hi: f64,
    resolution: usize,
) -> Result<ModeSet> {
    if model.dim() != 1 {
        return Err(SamplerError::UnsupportedTarget("mode search needs a one-dimensional target".into()));
    }
    if !(lo < hi) || resolution < 3 {
        return Err(SamplerError::invalid("mode search needs lo < hi and resolution ≥ 3"));
    }
    let potential = |x: f64| {
        model
            .potential(&[x])
            .ok_or_else(|| SamplerError::UnsupportedTarget("target does not expose its potential".into()))
    };
    let cell = (hi - lo) / (resolution - 1) as f64;
    let grid: Vec<f64> = (0..resolution).map(|i| lo + cell * i as f64).collect();
    let u = grid.iter().map(|&x| potential(x)).collect::<Result<Vec<f64>>>()?;
    let u_min = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let cutoff = u_min + 100f64.ln();
    let radius = 3.0 * cell;

    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for i in 1..resolution - 1 {
        if u[i] < u[i - 1] && u[i] < u[i + 1] && u[i] < cutoff {
            let f = |x: f64| model.potential(&[x]).unwrap_or(f64::INFINITY);
            let x = golden_section_min(f, grid[i - 1], grid[i + 1]);
            candidates.push((x, f(x)));
        }
    }
    let mut kept: Vec<(f64, f64)> = Vec::new();
    for (x, ux) in candidates {
        match kept.last_mut() {
            Some(last) if x - last.0 <= 2.0 * radius => {
                if ux < last.1 {
                    *last = (x, ux);
                }
            }
            _ => kept.push((x, ux)),
        }
    }
    ModeSet::new(kept.into_iter().map(|(x, _)| x).collect(), radius)
}

/// Number of modes with at least one particle within the capture radius.
pub fn mode_coverage(ensemble: &ParticleEnsemble, modes: &ModeSet) -> Result<usize> {
    if ensemble.dim() != 1 {
        return Err(SamplerError::UnsupportedTarget(format!(
            "mode coverage needs one-dimensional particles, got dimension {}",
            ensemble.dim()
        )));
    }
    if modes.is_empty() {
        return Err(SamplerError::invalid("mode set is empty"));
    }
    let particles = ensemble.positions();
    Ok(modes
        .locations
        .iter()
        .filter(|&&m| particles.iter().any(|&p| (p - m).abs() <= modes.radius))
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::{GaussianTarget, MixtureComponent, MixtureTarget, MultimodeTarget};

    #[test]
    fn gaussian_has_one_mode() {
        let g = GaussianTarget::standard(1, 1).unwrap();
        let modes = find_modes_grid(&g, -5.0, 5.0, 1001).unwrap();
        assert_eq!(modes.len(), 1);
        assert!(modes.locations[0].abs() < 0.01);
        assert!((modes.radius - 0.03).abs() < 1e-12);
    }

    #[test]
    fn separated_mixture_has_two_modes() {
        let c = |mean: f64| MixtureComponent { weight: 0.5, mean, std: 0.1 };
        let mix = MixtureTarget::new(vec![c(-2.0), c(2.0)]).unwrap();
        let modes = find_modes_grid(&mix, -5.0, 5.0, 1001).unwrap();
        assert_eq!(modes.len(), 2);
        assert!((modes.locations[0] + 2.0).abs() < 0.01);
        assert!((modes.locations[1] - 2.0).abs() < 0.01);
    }

    #[test]
    fn multimode_modes_stable_under_refinement() {
        let t = MultimodeTarget::new(Default::default());
        let coarse = find_modes_grid(&t, -5.0, 5.0, 1001).unwrap();
        let fine = find_modes_grid(&t, -5.0, 5.0, 2001).unwrap();
        assert!(coarse.len() >= 2, "{coarse:?}");
        assert_eq!(coarse.len(), fine.len());
        let cell = 10.0 / 1000.0;
        for (a, b) in coarse.locations.iter().zip(&fine.locations) {
            assert!((a - b).abs() < cell, "{a} vs {b}");
        }
    }

    #[test]
    fn coverage_examples() {
        let modes = ModeSet::new(vec![-1.0, 1.0], 0.2).unwrap();
        let e = ParticleEnsemble::new(vec![-1.05, 0.9, 0.95], 1).unwrap();
        assert_eq!(mode_coverage(&e, &modes).unwrap(), 2);
        let far = ParticleEnsemble::new(vec![5.0, 6.0], 1).unwrap();
        assert_eq!(mode_coverage(&far, &modes).unwrap(), 0);
        let exact = ParticleEnsemble::new(vec![-1.0, 1.0], 1).unwrap();
        assert_eq!(mode_coverage(&exact, &modes).unwrap(), 2);
        let two_d = ParticleEnsemble::new(vec![0.0, 0.0], 2).unwrap();
        assert!(matches!(mode_coverage(&two_d, &modes), Err(SamplerError::UnsupportedTarget(_))));
    }

    #[test]
    fn mode_set_validation() {
        assert!(ModeSet::new(vec![0.0, 0.3], 0.2).is_err());
        assert!(ModeSet::new(vec![1.0, 0.0], 0.1).is_err());
        assert!(ModeSet::new(vec![0.0], 0.0).is_err());
        assert!(ModeSet::new(vec![], 0.1).unwrap().is_empty());
    }
}
