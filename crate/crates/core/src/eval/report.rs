use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{ade_fde_over, rmse_at, Aggregation};
use crate::error::{Error, Result};
use crate::model::SceneInput;
use crate::pipeline::Pipeline;
use crate::scalar::Scalar;
use crate::traj::{convert, Point};

/// Prediction horizons in seconds and their step at 5 Hz.
pub const HORIZONS: [(u32, usize); 5] = [(1, 5), (2, 10), (3, 15), (4, 20), (5, 25)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonRow {
    pub horizon_s: u32,
    pub step: usize,
    pub rmse: f64,
    pub ade: f64,
    pub fde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub dataset: String,
    pub checkpoint: String,
    pub scenes: usize,
    pub k: usize,
    pub tau: usize,
    pub seed: u64,
    pub aggregation: Aggregation,
    /// What RMSE is computed on.
    pub rmse_source: String,
    pub scalar: String,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<HorizonRow>,
    /// Mean of the horizon rows.
    pub average: HorizonRow,
    /// ADE/FDE of the coarse samples over the full horizon, same aggregation.
    pub coarse_ade: f64,
    pub coarse_fde: f64,
    /// Mean wall time of one scene's prediction.
    pub latency_ms: f64,
}

/// Every per-scene output needed for scoring, in `f64` meters.
#[derive(Debug, Clone, Default)]
pub struct ScoredSet {
    pub truths: Vec<Vec<Point<f64>>>,
    pub refined: Vec<Vec<Vec<Point<f64>>>>,
    pub coarse: Vec<Vec<Vec<Point<f64>>>>,
    pub means: Vec<Vec<Point<f64>>>,
    pub latency_ms: f64,
}

/// Runs the pipeline on every scene with seed `seed + i` for scene `i`.
pub fn run_predictions<T: Scalar>(
    pipeline: &Pipeline<T>,
    scenes: &[SceneInput<T>],
    k: usize,
    tau: usize,
    seed: u64,
) -> Result<ScoredSet> {
    let mut out = ScoredSet::default();
    let start = Instant::now();
    for (i, scene) in scenes.iter().enumerate() {
        let future = scene
            .future
            .as_ref()
            .ok_or_else(|| Error::Contract("evaluation scene has no ground truth".into()))?;
        let p = pipeline.predict(scene, k, tau, seed.wrapping_add(i as u64))?;
        out.truths.push(convert(future));
        out.refined.push(p.trajectories.iter().map(|t| convert(t)).collect());
        out.coarse.push(p.coarse.iter().map(|t| convert(t)).collect());
        out.means.push(convert(&p.mean));
    }
    if !scenes.is_empty() {
        out.latency_ms = start.elapsed().as_secs_f64() * 1e3 / scenes.len() as f64;
    }
    Ok(out)
}

/// Horizon table from scored predictions. RMSE uses the most probable mode's
/// mean; ADE/FDE use `agg` over the refined samples.
pub fn report_from(set: &ScoredSet, agg: Aggregation, metadata: ReportMetadata) -> Result<HorizonReport> {
    let mut rows = Vec::with_capacity(HORIZONS.len());
    for (secs, step) in HORIZONS {
        let rmse = rmse_at(&set.means, &set.truths, step)?;
        let (ade, fde) = ade_fde_over(&set.refined, &set.truths, agg, Some(step))?;
        rows.push(HorizonRow {
            horizon_s: secs,
            step,
            rmse,
            ade,
            fde,
        });
    }
    let n = rows.len() as f64;
    let average = HorizonRow {
        horizon_s: 0,
        step: 0,
        rmse: rows.iter().map(|r| r.rmse).sum::<f64>() / n,
        ade: rows.iter().map(|r| r.ade).sum::<f64>() / n,
        fde: rows.iter().map(|r| r.fde).sum::<f64>() / n,
    };
    let (coarse_ade, coarse_fde) = ade_fde_over(&set.coarse, &set.truths, agg, None)?;
    Ok(HorizonReport {
        metadata,
        rows,
        average,
        coarse_ade,
        coarse_fde,
        latency_ms: set.latency_ms,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn horizon_report<T: Scalar>(
    pipeline: &Pipeline<T>,
    scenes: &[SceneInput<T>],
    k: usize,
    tau: usize,
    seed: u64,
    agg: Aggregation,
    dataset: &str,
    checkpoint: &str,
) -> Result<HorizonReport> {
    let set = run_predictions(pipeline, scenes, k, tau, seed)?;
    let metadata = ReportMetadata {
        dataset: dataset.to_string(),
        checkpoint: checkpoint.to_string(),
        scenes: scenes.len(),
        k,
        tau,
        seed,
        aggregation: agg,
        rmse_source: "most probable mode mean".into(),
        scalar: T::NAME.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    report_from(&set, agg, metadata)
}

impl HorizonReport {
    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let m = &self.metadata;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "dataset {} | checkpoint {} | scenes {} | K {} | tau {} | seed {} | {}",
            m.dataset, m.checkpoint, m.scenes, m.k, m.tau, m.seed, m.aggregation
        );
        let _ = writeln!(s, "{:>8} {:>9} {:>9} {:>9}", "horizon", "RMSE (m)", "ADE (m)", "FDE (m)");
        for r in &self.rows {
            let _ = writeln!(s, "{:>7}s {:>9.3} {:>9.3} {:>9.3}", r.horizon_s, r.rmse, r.ade, r.fde);
        }
        let a = &self.average;
        let _ = writeln!(s, "{:>8} {:>9.3} {:>9.3} {:>9.3}", "average", a.rmse, a.ade, a.fde);
        let _ = writeln!(
            s,
            "coarse ADE {:.3} m, FDE {:.3} m | {:.1} ms per scene",
            self.coarse_ade, self.coarse_fde, self.latency_ms
        );
        s
    }
}
