use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SamplerError};
use crate::output::format_f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: u64,
    /// Row-major `M × d` positions.
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub step: u64,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub dim: usize,
    pub snapshots: Vec<Snapshot>,
    pub metrics: Vec<MetricRecord>,
    pub wall_time: f64,
    pub config_echo: serde_json::Value,
}

impl RunTrace {
    /// Checks that snapshot steps strictly increase and that every metric
    /// step is also a snapshot step.
    pub fn check(&self) -> Result<()> {
        if self.snapshots.windows(2).any(|w| w[1].step <= w[0].step) {
            return Err(SamplerError::Internal("snapshot steps are not strictly increasing".into()));
        }
        let steps: Vec<u64> = self.snapshots.iter().map(|s| s.step).collect();
        if let Some(m) = self.metrics.iter().find(|m| steps.binary_search(&m.step).is_err()) {
            return Err(SamplerError::Internal(format!("metric step {} has no snapshot", m.step)));
        }
        Ok(())
    }

    /// Particle positions as CSV with header `step,particle,dim_0,…`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let header = ["step".to_string(), "particle".to_string()]
            .into_iter()
            .chain((0..self.dim).map(|c| format!("dim_{c}")));
        out.write_record(header).map_err(csv_error)?;
        for snap in &self.snapshots {
            for (i, p) in snap.positions.chunks(self.dim).enumerate() {
                let row = [snap.step.to_string(), i.to_string()]
                    .into_iter()
                    .chain(p.iter().map(|&v| format_f64(v)));
                out.write_record(row).map_err(csv_error)?;
            }
        }
        out.flush().map_err(|e| SamplerError::Internal(format!("flushing trace: {e}")))?;
        Ok(())
    }

    /// Metrics in long form: `step,name,value`.
    pub fn write_metrics_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["step", "name", "value"]).map_err(csv_error)?;
        for m in &self.metrics {
            for (name, &v) in &m.values {
                out.write_record([m.step.to_string(), name.clone(), format_f64(v)])
                    .map_err(csv_error)?;
            }
        }
        out.flush().map_err(|e| SamplerError::Internal(format!("flushing metrics: {e}")))?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> SamplerError {
    SamplerError::Internal(format!("writing CSV: {e}"))
}
