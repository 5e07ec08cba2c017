//! Quantitative diagnostics for sampler output.

mod modes;
mod moments;
mod trace;
mod wasserstein;

pub use modes::{find_modes_grid, mode_coverage, ModeSet};
pub use moments::{sample_moments, Moments};
pub use trace::{MetricRecord, RunTrace, Snapshot};
pub use wasserstein::{w1_1d, w1_vs_reference, GridReference, NormalReference, ReferenceSampler};
