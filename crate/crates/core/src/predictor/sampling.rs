use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gaussian::MultimodalDistribution;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::traj::Trajectory;

/// How coarse samples are spread over maneuver modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    /// All K samples from the most probable mode.
    #[default]
    MaxMode,
    /// K split across modes in proportion to their probabilities.
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseSamples<T> {
    pub trajectories: Vec<Trajectory<T>>,
    /// Mode each trajectory was drawn from.
    pub modes: Vec<usize>,
    /// Most probable mode.
    pub mode: usize,
    pub seed: u64,
}

/// Number of samples per mode by largest remainder of `k · p_i`; ties go to
/// the lower mode index.
pub fn proportional_counts<T: Scalar>(probs: &[T], k: usize) -> Vec<usize> {
    let total: f64 = probs.iter().map(|p| p.as_f64()).sum();
    let quotas: Vec<f64> = probs.iter().map(|p| p.as_f64() / total * k as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = k - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Draws `k` coarse trajectories, deterministic under `seed`.
pub fn sample_coarse<T: Scalar>(
    dist: &MultimodalDistribution<T>,
    k: usize,
    seed: u64,
    strategy: SamplingStrategy,
) -> Result<CoarseSamples<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = sample_coarse_with(dist, k, &mut rng, strategy)?;
    out.seed = seed;
    Ok(out)
}

pub fn sample_coarse_with<T: Scalar, R: Rng>(
    dist: &MultimodalDistribution<T>,
    k: usize,
    rng: &mut R,
    strategy: SamplingStrategy,
) -> Result<CoarseSamples<T>> {
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let mode = dist.probs.argmax_mode();
    let modes: Vec<usize> = match strategy {
        SamplingStrategy::MaxMode => vec![mode; k],
        SamplingStrategy::Proportional => proportional_counts(&dist.probs.joint, k)
            .into_iter()
            .enumerate()
            .flat_map(|(m, c)| std::iter::repeat_n(m, c))
            .collect(),
    };
    let trajectories = modes.iter().map(|&m| dist.modes[m].sample(rng)).collect();
    Ok(CoarseSamples {
        trajectories,
        modes,
        mode,
        seed: 0,
    })
}
