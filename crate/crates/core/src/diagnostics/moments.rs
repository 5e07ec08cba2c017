use crate::samplers::ParticleEnsemble;

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    /// Unbiased (divisor `M−1`) covariance; `None` when `M < 2`.
    pub covariance: Option<Vec<Vec<f64>>>,
}

pub fn sample_moments(ensemble: &ParticleEnsemble) -> Moments {
    let m = ensemble.len();
    let d = ensemble.dim();
    // Deviations are taken from the first particle so identical particles
    // give an exactly zero covariance.
    let origin = ensemble.particle(0);
    let mut shift = vec![0.0; d];
    for p in ensemble.particles() {
        for ((acc, v), o) in shift.iter_mut().zip(p).zip(origin) {
            *acc += v - o;
        }
    }
    for v in shift.iter_mut() {
        *v /= m as f64;
    }
    let mean: Vec<f64> = origin.iter().zip(&shift).map(|(o, s)| o + s).collect();
    if m < 2 {
        return Moments {
            mean,
            covariance: None,
        };
    }
    let mut cov = vec![vec![0.0; d]; d];
    for p in ensemble.particles() {
        let dev: Vec<f64> = (0..d).map(|c| (p[c] - origin[c]) - shift[c]).collect();
        for r in 0..d {
            for c in 0..d {
                cov[r][c] += dev[r] * dev[c];
            }
        }
    }
    let denom = (m - 1) as f64;
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v /= denom;
        }
    }
    Moments {
        mean,
        covariance: Some(cov),
    }
}
