use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::maneuver::NUM_MODES;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::traj::{Point, Trajectory};

/// Floor applied to σ inside the likelihood (meters).
pub const SIGMA_FLOOR: f64 = 1e-4;
/// |ρ| is clamped to this when factorising a covariance for sampling.
pub const RHO_LIMIT: f64 = 1.0 - 1e-6;

/// Lateral and longitudinal maneuver probabilities and their product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManeuverProbs<T> {
    pub lateral: [T; 3],
    pub longitudinal: [T; 2],
    /// `joint[2·lat + lon] = lateral[lat] · longitudinal[lon]`.
    pub joint: [T; NUM_MODES],
}

impl<T: Scalar> ManeuverProbs<T> {
    pub fn from_marginals(lateral: [T; 3], longitudinal: [T; 2]) -> Self {
        let mut joint = [T::zero(); NUM_MODES];
        for (i, j) in joint.iter_mut().enumerate() {
            *j = lateral[i / 2] * longitudinal[i % 2];
        }
        Self {
            lateral,
            longitudinal,
            joint,
        }
    }

    /// Softmax of both logit vectors.
    pub fn from_logits(lateral: &[T], longitudinal: &[T]) -> Self {
        let lat = softmax(lateral);
        let lon = softmax(longitudinal);
        Self::from_marginals([lat[0], lat[1], lat[2]], [lon[0], lon[1]])
    }

    /// Most probable joint mode; ties resolve to the lowest index.
    pub fn argmax_mode(&self) -> usize {
        argmax(&self.joint)
    }
}

pub fn softmax<T: Scalar>(x: &[T]) -> Vec<T> {
    let m = x.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let e: Vec<T> = x.iter().map(|&v| (v - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Index of the largest entry, first one on ties.
pub fn argmax<T: Scalar>(x: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}

/// Per-step bivariate normal parameters of one maneuver mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariateGaussian<T> {
    pub mu: Vec<Point<T>>,
    pub sigma: Vec<Point<T>>,
    pub rho: Vec<T>,
}

impl<T: Scalar> BivariateGaussian<T> {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// `log Π_t N(y_t; μ_t, σ_t, ρ_t)` with σ floored at [`SIGMA_FLOOR`].
    pub fn log_density(&self, y: &[Point<T>]) -> T {
        assert_eq!(y.len(), self.len(), "trajectory length mismatch");
        (0..self.len())
            .map(|t| step_log_density(self.mu[t], self.sigma[t], self.rho[t], y[t]))
            .sum()
    }

    /// Draws one trajectory by `μ + L·η`, `L` the Cholesky factor of each
    /// step's 2×2 covariance.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Trajectory<T> {
        (0..self.len())
            .map(|t| {
                let e1 = T::lit(rng.sample::<f64, _>(StandardNormal));
                let e2 = T::lit(rng.sample::<f64, _>(StandardNormal));
                reparameterize(self.mu[t], self.sigma[t], self.rho[t], e1, e2)
            })
            .collect()
    }
}

/// `μ + L·η` for one step.
pub fn reparameterize<T: Scalar>(mu: Point<T>, sigma: Point<T>, rho: T, e1: T, e2: T) -> Point<T> {
    let lim = T::lit(RHO_LIMIT);
    let rho = rho.max(-lim).min(lim);
    let c = (T::one() - rho * rho).sqrt();
    [mu[0] + sigma[0] * e1, mu[1] + sigma[1] * (rho * e1 + c * e2)]
}

/// Closed-form log-density of one bivariate normal step.
pub fn step_log_density<T: Scalar>(mu: Point<T>, sigma: Point<T>, rho: T, y: Point<T>) -> T {
    let floor = T::lit(SIGMA_FLOOR);
    let sx = sigma[0].max(floor);
    let sy = sigma[1].max(floor);
    let one_m = (T::one() - rho * rho).max(T::lit(1e-12));
    let zx = (y[0] - mu[0]) / sx;
    let zy = (y[1] - mu[1]) / sy;
    let q = (zx * zx + zy * zy - T::lit(2.0) * rho * zx * zy) / one_m;
    -(T::lit(2.0 * PI).ln() + sx.ln() + sy.ln() + T::lit(0.5) * one_m.ln() + T::lit(0.5) * q)
}

/// Six-mode distribution with its maneuver probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalDistribution<T> {
    pub modes: Vec<BivariateGaussian<T>>,
    pub probs: ManeuverProbs<T>,
}

/// `P(Y|X) = Σ_i P(m_i|X) · P_Ω(Y | m_i, X)`.
#[derive(Debug, Clone, Copy)]
pub struct MixtureDensity<'a, T> {
    dist: &'a MultimodalDistribution<T>,
}

pub fn mixture_posterior<T: Scalar>(dist: &MultimodalDistribution<T>) -> MixtureDensity<'_, T> {
    MixtureDensity { dist }
}

impl<T: Scalar> MixtureDensity<'_, T> {
    /// Log of the mixture density, by log-sum-exp over modes.
    pub fn log_density(&self, y: &[Point<T>]) -> T {
        let terms: Vec<T> = self
            .dist
            .modes
            .iter()
            .zip(self.dist.probs.joint)
            .filter(|(_, p)| *p > T::zero())
            .map(|(m, p)| p.ln() + m.log_density(y))
            .collect();
        let mx = terms.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        if mx == T::neg_infinity() {
            return mx;
        }
        mx + terms.iter().map(|&v| (v - mx).exp()).sum::<T>().ln()
    }

    pub fn density(&self, y: &[Point<T>]) -> T {
        self.log_density(y).exp()
    }
}

/// `−log(P_Ω(Y | m, X) · P(m | X))` for the supervised mode `m`.
pub fn nll_loss<T: Scalar>(dist: &MultimodalDistribution<T>, mode: usize, y: &[Point<T>]) -> T {
    -(dist.modes[mode].log_density(y) + dist.probs.joint[mode].ln())
}

/// `V = uᵀ C`: one convex combination of context rows per future step.
pub fn reweight_context<T: Scalar>(
    context: &ndarray::Array2<T>,
    weights: &ndarray::Array2<T>,
) -> Result<ndarray::Array2<T>> {
    if context.nrows() != weights.nrows() {
        return Err(Error::Contract(format!(
            "context has {} rows but weights have {}",
            context.nrows(),
            weights.nrows()
        )));
    }
    Ok(weights.t().dot(context))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn unit(t: usize) -> BivariateGaussian<f64> {
        BivariateGaussian {
            mu: vec![[0.0, 0.0]; t],
            sigma: vec![[1.0, 1.0]; t],
            rho: vec![0.0; t],
        }
    }

    #[test]
    fn uniform_marginals_give_uniform_joint() {
        let p = ManeuverProbs::<f64>::from_logits(&[0.0, 0.0, 0.0], &[0.0, 0.0]);
        for &l in &p.lateral {
            assert!((l - 1.0 / 3.0).abs() < 1e-15);
        }
        for &l in &p.longitudinal {
            assert!((l - 0.5).abs() < 1e-15);
        }
        for &j in &p.joint {
            assert!((j - 1.0 / 6.0).abs() < 1e-15);
        }
        assert_eq!(p.argmax_mode(), 0);
    }

    #[test]
    fn peak_density_is_one_over_two_pi() {
        let g = unit(1);
        let d = step_log_density(g.mu[0], g.sigma[0], g.rho[0], [0.0, 0.0]).exp();
        assert!((d - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn nll_at_the_mean_is_tf_log_two_pi() {
        let tf = 25;
        let mut probs = ManeuverProbs::from_marginals([0.0, 1.0, 0.0], [0.0, 1.0]);
        probs.joint[3] = 1.0;
        let dist = MultimodalDistribution {
            modes: vec![unit(tf); 6],
            probs,
        };
        let l = nll_loss(&dist, 3, &vec![[0.0, 0.0]; tf]);
        assert!((l - tf as f64 * (2.0 * PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn wider_sigma_raises_nll_at_the_mean() {
        let probs = ManeuverProbs::from_logits(&[0.0; 3], &[0.0; 2]);
        let mut dist = MultimodalDistribution {
            modes: vec![unit(5); 6],
            probs,
        };
        let y = vec![[0.0, 0.0]; 5];
        let before = nll_loss(&dist, 0, &y);
        for s in &mut dist.modes[0].sigma {
            *s = [2.0, 2.0];
        }
        assert!(nll_loss(&dist, 0, &y) > before);
    }

    #[test]
    fn degenerate_mixture_is_the_mode_density() {
        let mut modes = vec![unit(3); 6];
        modes[2].mu = vec![[1.0, -1.0]; 3];
        let dist = MultimodalDistribution {
            modes,
            probs: ManeuverProbs::from_marginals([0.0, 1.0, 0.0], [1.0, 0.0]),
        };
        let y = vec![[0.3, 0.2]; 3];
        let mix = mixture_posterior(&dist).log_density(&y);
        assert!((mix - dist.modes[2].log_density(&y)).abs() < 1e-12);
    }

    #[test]
    fn reweighting_selects_and_averages() {
        let c: ndarray::Array2<f64> = array![[1.0, 2.0], [3.0, 4.0], [5.0, 9.0]];
        let one_hot = array![[0.0], [0.0], [1.0]];
        assert_eq!(reweight_context(&c, &one_hot).unwrap(), array![[5.0, 9.0]]);
        let uniform = ndarray::Array2::from_elem((3, 1), 1.0 / 3.0);
        let v = reweight_context(&c, &uniform).unwrap();
        assert!((v[[0, 0]] - 3.0).abs() < 1e-12 && (v[[0, 1]] - 5.0).abs() < 1e-12);
        assert!(reweight_context(&c, &ndarray::Array2::zeros((2, 1))).is_err());
    }

    #[test]
    fn tiny_sigma_samples_sit_on_the_mean() {
        let g: BivariateGaussian<f64> = BivariateGaussian {
            mu: vec![[1.0, 2.0], [3.0, 4.0]],
            sigma: vec![[1e-8, 1e-8]; 2],
            rho: vec![0.3; 2],
        };
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        for _ in 0..10 {
            let s = g.sample(&mut rng);
            for (a, b) in s.iter().zip(&g.mu) {
                assert!((a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6);
            }
        }
    }
}
