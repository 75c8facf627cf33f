use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traj::Point;

/// How a set of K predictions per instance is reduced for ADE/FDE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Per instance, the sample with the lowest ADE.
    BestOfK,
    /// The first prediction of each instance.
    Single,
}

impl FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best" | "best_of_k" => Ok(Self::BestOfK),
            "single" => Ok(Self::Single),
            _ => Err(Error::Config(format!("unknown aggregation `{s}`"))),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BestOfK => "best_of_k",
            Self::Single => "single",
        })
    }
}

pub fn displacement(a: Point<f64>, b: Point<f64>) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn check_aligned<P>(preds: &[P], truths: &[Vec<Point<f64>>]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::UndefinedMetric("no instances".into()));
    }
    if preds.len() != truths.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} ground truths",
            preds.len(),
            truths.len()
        )));
    }
    Ok(())
}

/// `sqrt(mean_i ‖Y_i^t − Ŷ_i^t‖²)` at the 1-based future step `step`.
pub fn rmse_at(preds: &[Vec<Point<f64>>], truths: &[Vec<Point<f64>>], step: usize) -> Result<f64> {
    check_aligned(preds, truths)?;
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(truths) {
        if step == 0 || step > p.len() || step > t.len() {
            return Err(Error::Contract(format!("step {step} outside the trajectory")));
        }
        let d = displacement(p[step - 1], t[step - 1]);
        total += d * d;
    }
    Ok((total / preds.len() as f64).sqrt())
}

/// ADE and FDE of one trajectory over its first `steps` points.
pub fn trajectory_ade_fde(pred: &[Point<f64>], truth: &[Point<f64>], steps: usize) -> Result<(f64, f64)> {
    if steps == 0 || steps > pred.len() || steps > truth.len() {
        return Err(Error::Contract(format!("cannot score {steps} steps")));
    }
    let d: Vec<f64> = (0..steps).map(|t| displacement(pred[t], truth[t])).collect();
    Ok((d.iter().sum::<f64>() / steps as f64, d[steps - 1]))
}

/// Mean ADE and FDE over instances, each holding K ≥ 1 predictions, scored
/// over the first `steps` points (`None` for the full length).
pub fn ade_fde_over(
    preds: &[Vec<Vec<Point<f64>>>],
    truths: &[Vec<Point<f64>>],
    agg: Aggregation,
    steps: Option<usize>,
) -> Result<(f64, f64)> {
    check_aligned(preds, truths)?;
    let (mut ade, mut fde) = (0.0, 0.0);
    for (samples, truth) in preds.iter().zip(truths) {
        if samples.is_empty() {
            return Err(Error::UndefinedMetric("instance without predictions".into()));
        }
        let n = steps.unwrap_or(truth.len());
        let (a, f) = match agg {
            Aggregation::Single => trajectory_ade_fde(&samples[0], truth, n)?,
            Aggregation::BestOfK => {
                let mut best = trajectory_ade_fde(&samples[0], truth, n)?;
                for s in &samples[1..] {
                    let c = trajectory_ade_fde(s, truth, n)?;
                    if c.0 < best.0 {
                        best = c;
                    }
                }
                best
            }
        };
        ade += a;
        fde += f;
    }
    let n = preds.len() as f64;
    Ok((ade / n, fde / n))
}

pub fn ade_fde(preds: &[Vec<Vec<Point<f64>>>], truths: &[Vec<Point<f64>>], agg: Aggregation) -> Result<(f64, f64)> {
    ade_fde_over(preds, truths, agg, None)
}
