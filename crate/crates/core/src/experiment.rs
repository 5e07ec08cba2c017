//! End-to-end experiments: a config-driven run and the multimode SVGD/SPOS
//! comparison, each writing CSV traces and a JSON report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{check_writable, ExperimentConfig, TargetConfig};
use crate::diagnostics::{find_modes_grid, mode_coverage, sample_moments, w1_vs_reference, ModeSet, RunTrace};
use crate::error::{Result, SamplerError};
use crate::kernel::KernelConfig;
use crate::output::to_json_string;
use crate::rng::{self, DIAGNOSTICS_STREAM};
use crate::samplers::{run, DiagnosticsConfig, ParticleEnsemble, SamplerConfig, SamplerKind};
use crate::target::{CountingModel, MultimodeTarget, OracleCounts, PotentialModel};

/// Grid used to locate modes of the built-in multimode target.
pub const MULTIMODE_SEARCH: (f64, f64, usize) = (-5.0, 5.0, 1001);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub modes: ModeSet,
    pub coverage: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub sampler: String,
    pub particles: usize,
    pub dim: usize,
    pub total_steps: u64,
    pub final_mean: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_covariance: Option<Vec<Vec<f64>>>,
    /// Per-coordinate W₁ of the final ensemble against the exact marginals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_coverage: Option<ModeReport>,
    pub wall_time: f64,
    pub oracle_counts: OracleCounts,
    pub config_echo: ExperimentConfig,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| SamplerError::io(path, e))
}

fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    write_file(path, &buf)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = to_json_string(value).map_err(|e| SamplerError::Internal(format!("serializing JSON: {e}")))?;
    write_file(path, text.as_bytes())
}

/// Search grid for 1-D targets whose density is known in closed form.
fn mode_search_grid(target: &TargetConfig) -> Option<(f64, f64, usize)> {
    match target {
        TargetConfig::Multimode { .. } => Some(MULTIMODE_SEARCH),
        TargetConfig::Mixture { components } => {
            let lo = components.iter().map(|c| c.mean - 6.0 * c.std).fold(f64::INFINITY, f64::min);
            let hi = components.iter().map(|c| c.mean + 6.0 * c.std).fold(f64::NEG_INFINITY, f64::max);
            Some((lo, hi, 2001))
        }
        TargetConfig::Gaussian { mean, covariance, .. } if mean.len() == 1 => {
            let sd = covariance[0][0].sqrt();
            Some((mean[0] - 6.0 * sd, mean[0] + 6.0 * sd, 1201))
        }
        _ => None,
    }
}

/// Per-coordinate W₁ against the model's exact marginals, if it has them.
pub fn final_w1<M: PotentialModel + ?Sized>(
    model: &M,
    ensemble: &ParticleEnsemble,
    seed: u64,
    repeats: usize,
) -> Result<Option<Vec<f64>>> {
    let mut rng = rng::stream(seed, DIAGNOSTICS_STREAM);
    let mut out = Vec::with_capacity(ensemble.dim());
    for c in 0..ensemble.dim() {
        let Some(reference) = model.marginal_reference(c) else {
            return Ok(None);
        };
        out.push(w1_vs_reference(&ensemble.coordinate(c), reference.as_ref(), &mut rng, repeats)?);
    }
    Ok(Some(out))
}

/// Runs the experiment described by the config file at `path`, writing the
/// trace CSV and summary JSON it names.
pub fn run_config_file(path: &Path) -> Result<RunSummary> {
    let (cfg, base) = ExperimentConfig::load(path)?;
    run_experiment(&cfg, &base)
}

pub fn run_experiment(cfg: &ExperimentConfig, base: &Path) -> Result<RunSummary> {
    let (trace_path, summary_path) = cfg.prepare_outputs(base)?;
    let model = CountingModel::new(cfg.target.build(base)?);
    let initial = cfg.initial_ensemble(model.dim())?;
    let diagnostics = DiagnosticsConfig {
        snapshot_every: cfg.outputs.snapshot_every,
        ..Default::default()
    };
    let (mut trace, ensemble) = run(initial, &model, &cfg.sampler, &cfg.kernel, &diagnostics)?;
    trace.config_echo = serde_json::to_value(cfg)
        .map_err(|e| SamplerError::Internal(format!("serializing config: {e}")))?;
    write_trace(&trace_path, &trace)?;

    let counts = model.counts();
    let moments = sample_moments(&ensemble);
    let w1 = final_w1(&model, &ensemble, cfg.sampler.seed, cfg.outputs.w1_repeats)?;
    let mode_coverage = match mode_search_grid(&cfg.target) {
        Some((lo, hi, res)) => {
            let mut modes = find_modes_grid(&model, lo, hi, res)?;
            if let Some(r) = cfg.outputs.mode_radius {
                modes = modes.with_radius(r)?;
            }
            if modes.is_empty() {
                None
            } else {
                let coverage = mode_coverage(&ensemble, &modes)?;
                Some(ModeReport { modes, coverage })
            }
        }
        None => None,
    };
    let summary = RunSummary {
        sampler: cfg.sampler.kind.name().to_string(),
        particles: ensemble.len(),
        dim: ensemble.dim(),
        total_steps: cfg.sampler.total_steps,
        final_mean: moments.mean,
        final_covariance: moments.covariance,
        w1,
        mode_coverage,
        wall_time: trace.wall_time,
        oracle_counts: counts,
        config_echo: cfg.clone(),
    };
    write_json(&summary_path, &summary)?;
    Ok(summary)
}

/// Settings of the multimode SVGD/SPOS comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub seed: u64,
    pub particles: usize,
    pub steps: u64,
    pub step_size: f64,
    pub beta: f64,
    /// Fixed kernel bandwidth shared by both samplers.
    pub bandwidth: f64,
    pub init_mean: f64,
    pub init_scale: f64,
    /// Capture radius; defaults to three cells of the mode-search grid.
    pub radius: Option<f64>,
    pub snapshot_every: u64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            particles: 200,
            steps: 5000,
            step_size: 1e-3,
            beta: 1.0,
            bandwidth: 1.0,
            init_mean: 0.0,
            init_scale: 0.5,
            radius: None,
            snapshot_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub options: CompareOptions,
    pub modes: ModeSet,
    pub coverage_spos: usize,
    pub coverage_svgd: usize,
    pub final_spos: Vec<f64>,
    pub final_svgd: Vec<f64>,
    pub wall_time: f64,
}

/// Runs SVGD and SPOS from the same initial cluster on the multimode target
/// and counts the modes each ends up covering. With `out_dir`, writes
/// `svgd_trace.csv`, `spos_trace.csv` and `report.json` there.
pub fn compare_multimode(options: &CompareOptions, out_dir: Option<&Path>) -> Result<CompareReport> {
    let paths = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| SamplerError::io(dir, e))?;
            let paths: [PathBuf; 3] = ["svgd_trace.csv", "spos_trace.csv", "report.json"].map(|f| dir.join(f));
            for p in &paths {
                check_writable(p)?;
            }
            Some(paths)
        }
        None => None,
    };
    let model = MultimodeTarget::default();
    let (lo, hi, res) = MULTIMODE_SEARCH;
    let mut modes = find_modes_grid(&model, lo, hi, res)?;
    if let Some(r) = options.radius {
        modes = modes.with_radius(r)?;
    }
    let initial = ParticleEnsemble::gaussian(options.particles, &[options.init_mean], options.init_scale, options.seed)?;
    let kernel = KernelConfig::fixed(options.bandwidth);
    let diagnostics = DiagnosticsConfig {
        snapshot_every: options.snapshot_every,
        ..Default::default()
    };

    let mut wall_time = 0.0;
    let mut outcome = Vec::new();
    for kind in [SamplerKind::Svgd, SamplerKind::Spos] {
        let cfg = SamplerConfig::new(kind, options.step_size, options.beta, 1, options.steps, options.seed);
        cfg.validate()?;
        let (trace, ensemble) = run(initial.clone(), &model, &cfg, &kernel, &diagnostics)?;
        wall_time += trace.wall_time;
        outcome.push((trace, ensemble));
    }
    let (svgd_trace, svgd) = &outcome[0];
    let (spos_trace, spos) = &outcome[1];
    let report = CompareReport {
        options: options.clone(),
        coverage_spos: mode_coverage(spos, &modes)?,
        coverage_svgd: mode_coverage(svgd, &modes)?,
        modes,
        final_spos: spos.positions().to_vec(),
        final_svgd: svgd.positions().to_vec(),
        wall_time,
    };
    if let Some([svgd_path, spos_path, report_path]) = &paths {
        write_trace(svgd_path, svgd_trace)?;
        write_trace(spos_path, spos_trace)?;
        write_json(report_path, &report)?;
    }
    Ok(report)
}
