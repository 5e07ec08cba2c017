//! Calibration suites with pass/fail verdicts: SGLD and SPOS on Gaussian
//! targets, SPOS on a conjugate linear regression, and the W₁ trend of SPOS
//! from a displaced start.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::check_writable;
use crate::diagnostics::sample_moments;
use crate::error::{Result, SamplerError};
use crate::kernel::KernelConfig;
use crate::output::to_json_string;
use crate::rng;
use crate::samplers::{run, DiagnosticsConfig, ParticleEnsemble, Sampler, SamplerConfig, SamplerKind};
use crate::target::{analytic_posterior, make_bayes_linreg, GaussianTarget, RegressionDataset};

/// Environment variable holding a multiplier applied to every tolerance band.
pub const TOLERANCE_SCALE_VAR: &str = "SPOS_TOLERANCE_SCALE";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Multiplier on each band's half-width; `1` is the stated band.
    pub scale: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

impl Tolerances {
    /// Reads [`TOLERANCE_SCALE_VAR`], falling back to the stated bands.
    pub fn from_env() -> Result<Self> {
        match std::env::var(TOLERANCE_SCALE_VAR) {
            Ok(text) => {
                let scale: f64 = text.trim().parse().map_err(|_| {
                    SamplerError::Config(format!("{TOLERANCE_SCALE_VAR}: not a number: {text:?}"))
                })?;
                if !(scale >= 0.0 && scale.is_finite()) {
                    return Err(SamplerError::Config(format!(
                        "{TOLERANCE_SCALE_VAR}: must be non-negative, got {scale}"
                    )));
                }
                Ok(Self { scale })
            }
            Err(_) => Ok(Self::default()),
        }
    }

    fn within(&self, value: f64, center: f64, half_width: f64) -> bool {
        (value - center).abs() <= half_width * self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub name: String,
    pub passed: bool,
    pub requirement: String,
    pub measured: BTreeMap<String, f64>,
    pub wall_time: f64,
}

impl CriterionResult {
    /// One-line verdict, e.g. `PASS gaussian-calibration (1.2 s): …`.
    pub fn line(&self) -> String {
        let measured: Vec<String> = self.measured.iter().map(|(k, v)| format!("{k}={v:.4}")).collect();
        format!(
            "{} {} ({:.1} s): {} [{}]",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.wall_time,
            self.requirement,
            measured.join(", ")
        )
    }
}

/// SGLD on the unit 1-D Gaussian with `h = 0.01`: 5000 burn-in steps, then
/// 50000 recorded steps pooled over 10 independent chains. Requires the
/// pooled mean within ±0.10 and variance within [0.85, 1.15], in under 10 s.
pub fn gaussian_calibration(seed: u64, tol: &Tolerances) -> Result<CriterionResult> {
    let started = Instant::now();
    let (chains, burn_in, recorded) = (10, 5_000u64, 50_000u64);
    let model = GaussianTarget::standard(1, 10)?;
    let cfg = SamplerConfig::new(SamplerKind::Sgld, 0.01, 1.0, 2, burn_in + recorded, seed);
    let mut ensemble = ParticleEnsemble::gaussian(chains, &[0.0], 1.0, seed)?;
    let mut sampler = Sampler::new(&model, cfg, KernelConfig::default(), &ensemble)?;
    for _ in 0..burn_in {
        sampler.step(&mut ensemble)?;
    }
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..recorded {
        sampler.step(&mut ensemble)?;
        for &x in ensemble.positions() {
            sum += x;
            sum_sq += x * x;
        }
    }
    let n = (chains as u64 * recorded) as f64;
    let mean = sum / n;
    let variance = (sum_sq - n * mean * mean) / (n - 1.0);
    let wall_time = started.elapsed().as_secs_f64();
    Ok(CriterionResult {
        name: "gaussian-calibration".into(),
        passed: tol.within(mean, 0.0, 0.10) && tol.within(variance, 1.0, 0.15) && wall_time < 10.0,
        requirement: "SGLD mean within ±0.10, variance within [0.85, 1.15], runtime < 10 s".into(),
        measured: BTreeMap::from([("mean".into(), mean), ("variance".into(), variance)]),
        wall_time,
    })
}

/// SPOS with 100 particles on the unit 2-D Gaussian, `h = 0.05`, 2000
/// steps, `β = 100`, median bandwidth. Requires each coordinate's final mean within
/// ±0.15 and variance within [0.75, 1.25], in under 30 s.
pub fn ensemble_calibration(seed: u64, tol: &Tolerances) -> Result<CriterionResult> {
    let started = Instant::now();
    let model = GaussianTarget::standard(2, 1)?;
    let cfg = SamplerConfig::new(SamplerKind::Spos, 0.05, 100.0, 1, 2000, seed);
    let initial = ParticleEnsemble::gaussian(100, &[1.0, -1.0], 0.5, seed)?;
    let diagnostics = DiagnosticsConfig {
        snapshot_every: 2000,
        ..Default::default()
    };
    let (_, ensemble) = run(initial, &model, &cfg, &KernelConfig::median(), &diagnostics)?;
    let moments = sample_moments(&ensemble);
    let cov = moments
        .covariance
        .ok_or_else(|| SamplerError::Internal("covariance needs two particles".into()))?;
    let wall_time = started.elapsed().as_secs_f64();
    let mut measured = BTreeMap::new();
    let mut passed = wall_time < 30.0;
    for c in 0..2 {
        measured.insert(format!("mean_{c}"), moments.mean[c]);
        measured.insert(format!("var_{c}"), cov[c][c]);
        passed &= tol.within(moments.mean[c], 0.0, 0.15) && tol.within(cov[c][c], 1.0, 0.25);
    }
    Ok(CriterionResult {
        name: "ensemble-calibration".into(),
        passed,
        requirement: "SPOS per-coordinate mean within ±0.15, variance within [0.75, 1.25], runtime < 30 s".into(),
        measured,
        wall_time,
    })
}

/// 100 draws of `y = xᵀθ + ε` with `x ~ N(0, I₃)`, `θ = (1, −0.5, 0.25)`,
/// `ε ~ N(0, 0.5²)`, prior scale 1.
pub fn synthetic_regression(seed: u64) -> Result<RegressionDataset> {
    let theta = [1.0, -0.5, 0.25];
    let noise_std = 0.5;
    let mut rng = rng::stream(seed, 0);
    let mut design = Vec::with_capacity(100);
    let mut responses = Vec::with_capacity(100);
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
        let eps: f64 = StandardNormal.sample(&mut rng);
        responses.push(x.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() + noise_std * eps);
        design.push(x);
    }
    RegressionDataset::new(design, responses, noise_std, 1.0)
}

/// SPOS with 200 particles for 5000 steps on [`synthetic_regression`],
/// `h = 1e-4`, `β = 10`, full-size batches drawn with replacement. Requires the
/// ensemble mean within 0.05 of the posterior mean and each marginal
/// variance within 20% of the posterior's, in under 60 s.
pub fn posterior_accuracy(seed: u64, tol: &Tolerances) -> Result<CriterionResult> {
    let started = Instant::now();
    let data = synthetic_regression(seed)?;
    let posterior = analytic_posterior(&data)?;
    let model = make_bayes_linreg(&data)?;
    let cfg = SamplerConfig::new(SamplerKind::Spos, 1e-4, 10.0, 100, 5000, seed);
    let initial = ParticleEnsemble::gaussian(200, &[0.0; 3], 1.0, seed)?;
    let diagnostics = DiagnosticsConfig {
        snapshot_every: 5000,
        ..Default::default()
    };
    let (_, ensemble) = run(initial, &model, &cfg, &KernelConfig::median(), &diagnostics)?;
    let moments = sample_moments(&ensemble);
    let cov = moments
        .covariance
        .ok_or_else(|| SamplerError::Internal("covariance needs two particles".into()))?;
    let wall_time = started.elapsed().as_secs_f64();
    let mut measured = BTreeMap::new();
    let mut passed = wall_time < 60.0;
    for c in 0..3 {
        let mean_err = moments.mean[c] - posterior.mean[c];
        let var_ratio = cov[c][c] / posterior.covariance[c][c];
        measured.insert(format!("mean_error_{c}"), mean_err);
        measured.insert(format!("var_ratio_{c}"), var_ratio);
        passed &= tol.within(mean_err, 0.0, 0.05) && tol.within(var_ratio, 1.0, 0.20);
    }
    Ok(CriterionResult {
        name: "posterior-accuracy".into(),
        passed,
        requirement: "SPOS mean within 0.05 of the posterior mean, marginal variances within 20%, runtime < 60 s"
            .into(),
        measured,
        wall_time,
    })
}

/// Median per-coordinate W₁ against the unit Gaussian over the first and
/// last 10% of snapshots of an SPOS run started at `N(3·1, 0.5²·I)`.
pub fn w1_trend(seed: u64) -> Result<(f64, f64)> {
    let model = GaussianTarget::standard(2, 1)?;
    let steps = 1000;
    let cfg = SamplerConfig::new(SamplerKind::Spos, 0.01, 1.0, 1, steps, seed);
    let initial = ParticleEnsemble::gaussian(100, &[3.0, 3.0], 0.5, seed)?;
    let diagnostics = DiagnosticsConfig {
        snapshot_every: 10,
        moments: false,
        w1_repeats: Some(3),
    };
    let (trace, _) = run(initial, &model, &cfg, &KernelConfig::median(), &diagnostics)?;
    let per_record: Vec<Vec<f64>> = trace
        .metrics
        .iter()
        .map(|m| m.values.iter().filter(|(k, _)| k.starts_with("w1_")).map(|(_, &v)| v).collect())
        .collect();
    let window = (per_record.len() / 10).max(1);
    let median = |rows: &[Vec<f64>]| {
        let mut all: Vec<f64> = rows.iter().flatten().cloned().collect();
        all.sort_unstable_by(f64::total_cmp);
        let mid = all.len() / 2;
        if all.len() % 2 == 1 {
            all[mid]
        } else {
            0.5 * (all[mid - 1] + all[mid])
        }
    };
    let early = median(&per_record[..window]);
    let late = median(&per_record[per_record.len() - window..]);
    Ok((early, late))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorecard {
    pub passed: bool,
    pub tolerance_scale: f64,
    pub criteria: Vec<CriterionResult>,
}

impl Scorecard {
    pub fn failures(&self) -> Vec<&str> {
        self.criteria.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

/// Default seed of the validation suites.
pub const VALIDATION_SEED: u64 = 20240601;

/// Runs the Gaussian and conjugate-posterior suites and, with `out_dir`,
/// writes `scorecard.json` there.
pub fn validate(out_dir: Option<&Path>, tol: &Tolerances) -> Result<Scorecard> {
    let scorecard_path = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| SamplerError::io(dir, e))?;
            let path = dir.join("scorecard.json");
            check_writable(&path)?;
            Some(path)
        }
        None => None,
    };
    let criteria = vec![
        gaussian_calibration(VALIDATION_SEED, tol)?,
        ensemble_calibration(VALIDATION_SEED, tol)?,
        posterior_accuracy(VALIDATION_SEED, tol)?,
    ];
    for c in &criteria {
        log::info!("{}", c.line());
    }
    let scorecard = Scorecard {
        passed: criteria.iter().all(|c| c.passed),
        tolerance_scale: tol.scale,
        criteria,
    };
    if let Some(path) = scorecard_path {
        let text = to_json_string(&scorecard).map_err(|e| SamplerError::Internal(format!("serializing JSON: {e}")))?;
        fs::write(&path, text).map_err(|e| SamplerError::io(&path, e))?;
    }
    Ok(scorecard)
}
