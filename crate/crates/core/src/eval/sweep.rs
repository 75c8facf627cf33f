use serde::{Deserialize, Serialize};

use super::metrics::{ade_fde, Aggregation};
use super::report::run_predictions;
use crate::error::Result;
use crate::model::SceneInput;
use crate::pipeline::Pipeline;
use crate::scalar::Scalar;

/// Denoising step counts compared by default.
pub const DEFAULT_TAUS: [usize; 3] = [3, 10, 15];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: usize,
    pub ade: f64,
    pub fde: f64,
    /// Mean wall time per scene.
    pub latency_ms: f64,
}

/// Accuracy and latency of the full pipeline for each `τ`.
pub fn tau_sweep<T: Scalar>(
    pipeline: &Pipeline<T>,
    scenes: &[SceneInput<T>],
    taus: &[usize],
    k: usize,
    seed: u64,
    agg: Aggregation,
) -> Result<Vec<SweepRow>> {
    taus.iter()
        .map(|&tau| {
            let set = run_predictions(pipeline, scenes, k, tau, seed)?;
            let (ade, fde) = ade_fde(&set.refined, &set.truths, agg)?;
            Ok(SweepRow {
                tau,
                ade,
                fde,
                latency_ms: set.latency_ms,
            })
        })
        .collect()
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut s = format!("{:>5} {:>9} {:>9} {:>12}\n", "tau", "ADE (m)", "FDE (m)", "ms/scene");
    for r in rows {
        s.push_str(&format!("{:>5} {:>9.3} {:>9.3} {:>12.2}\n", r.tau, r.ade, r.fde, r.latency_ms));
    }
    s
}
