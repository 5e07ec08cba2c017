use std::collections::BTreeMap;
use std::time::Instant;

use super::{ParticleEnsemble, Sampler, SamplerConfig};
use crate::diagnostics::{sample_moments, w1_vs_reference, MetricRecord, RunTrace, Snapshot};
use crate::error::{Result, SamplerError};
use crate::kernel::KernelConfig;
use crate::rng::{self, DIAGNOSTICS_STREAM};
use crate::target::PotentialModel;

/// What `run` records besides the final ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    /// Snapshot interval; step 0 and the final step are always kept.
    pub snapshot_every: u64,
    /// Record per-coordinate `mean_c` / `var_c` at each snapshot.
    pub moments: bool,
    /// Record per-coordinate `w1_c` against the model's exact marginals,
    /// taking the median over this many reference batches.
    pub w1_repeats: Option<usize>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            snapshot_every: 1,
            moments: false,
            w1_repeats: None,
        }
    }
}

/// Runs `config.total_steps` steps from `initial`.
pub fn run<M: PotentialModel + ?Sized>(
    initial: ParticleEnsemble,
    model: &M,
    config: &SamplerConfig,
    kernel: &KernelConfig,
    diagnostics: &DiagnosticsConfig,
) -> Result<(RunTrace, ParticleEnsemble)> {
    if diagnostics.snapshot_every == 0 {
        return Err(SamplerError::invalid("snapshot interval must be at least 1"));
    }
    let started = Instant::now();
    let mut sampler = Sampler::new(model, config.clone(), *kernel, &initial)?;
    let references = match diagnostics.w1_repeats {
        Some(_) => (0..model.dim())
            .map(|c| {
                model.marginal_reference(c).ok_or_else(|| {
                    SamplerError::UnsupportedTarget(format!(
                        "no exact reference sampler for coordinate {c}"
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let mut diag_rng = rng::stream(config.seed, DIAGNOSTICS_STREAM);

    let mut trace = RunTrace {
        dim: initial.dim(),
        snapshots: Vec::new(),
        metrics: Vec::new(),
        wall_time: 0.0,
        config_echo: serde_json::json!({ "sampler": config, "kernel": kernel }),
    };
    let mut record = |ens: &ParticleEnsemble, trace: &mut RunTrace| -> Result<()> {
        trace.snapshots.push(Snapshot {
            step: ens.step(),
            positions: ens.positions().to_vec(),
        });
        let mut values = BTreeMap::new();
        if diagnostics.moments {
            let m = sample_moments(ens);
            for c in 0..ens.dim() {
                values.insert(format!("mean_{c}"), m.mean[c]);
                if let Some(cov) = &m.covariance {
                    values.insert(format!("var_{c}"), cov[c][c]);
                }
            }
        }
        if let Some(repeats) = diagnostics.w1_repeats {
            for (c, reference) in references.iter().enumerate() {
                let w1 = w1_vs_reference(&ens.coordinate(c), reference.as_ref(), &mut diag_rng, repeats)?;
                values.insert(format!("w1_{c}"), w1);
            }
        }
        if !values.is_empty() {
            trace.metrics.push(MetricRecord {
                step: ens.step(),
                values,
            });
        }
        Ok(())
    };

    let mut ensemble = initial;
    let last = ensemble.step() + config.total_steps;
    record(&ensemble, &mut trace)?;
    for _ in 0..config.total_steps {
        sampler.step(&mut ensemble)?;
        let k = ensemble.step();
        if k.is_multiple_of(diagnostics.snapshot_every) || k == last {
            record(&ensemble, &mut trace)?;
        }
    }
    trace.wall_time = started.elapsed().as_secs_f64();
    Ok((trace, ensemble))
}
