use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// β, α and ᾱ tables over steps `1..=T` plus the inference step count τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRecord", into = "ScheduleRecord")]
pub struct DiffusionSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
    tau: usize,
}

/// Serialized form: the β list and τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub betas: Vec<f64>,
    pub tau: usize,
}

impl TryFrom<ScheduleRecord> for DiffusionSchedule {
    type Error = Error;
    fn try_from(r: ScheduleRecord) -> Result<Self> {
        DiffusionSchedule::from_betas(r.betas, r.tau)
    }
}

impl From<DiffusionSchedule> for ScheduleRecord {
    fn from(s: DiffusionSchedule) -> Self {
        Self {
            betas: s.betas,
            tau: s.tau,
        }
    }
}

/// Linear β from `beta_start` to `beta_end` over `steps` steps.
pub fn make_schedule(steps: usize, beta_start: f64, beta_end: f64, tau: usize) -> Result<DiffusionSchedule> {
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::Config(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start} and {beta_end}"
        )));
    }
    if steps == 0 {
        return Err(Error::Config("diffusion needs at least one step".into()));
    }
    let betas = (0..steps)
        .map(|i| {
            if steps == 1 {
                beta_start
            } else {
                beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    DiffusionSchedule::from_betas(betas, tau)
}

impl DiffusionSchedule {
    pub fn from_betas(betas: Vec<f64>, tau: usize) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Config("diffusion needs at least one step".into()));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::Config(format!("beta {b} outside (0, 1)")));
        }
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut acc = 1.0;
        for b in &betas {
            acc *= 1.0 - b;
            alpha_bars.push(acc);
        }
        let s = Self { betas, alpha_bars, tau: 0 };
        s.with_tau(tau)
    }

    /// Same tables with a different inference step count.
    pub fn with_tau(mut self, tau: usize) -> Result<Self> {
        if tau > self.steps() {
            return Err(Error::Config(format!(
                "tau {tau} exceeds the {} diffusion steps",
                self.steps()
            )));
        }
        self.tau = tau;
        Ok(self)
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `β_t` for `t` in `1..=T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.betas[t - 1]
    }

    /// `ᾱ_t`, with `ᾱ_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    fn check_step(&self, t: usize, lo: usize) -> Result<()> {
        if t < lo || t > self.steps() {
            return Err(Error::Contract(format!(
                "diffusion step {t} outside {lo}..={}",
                self.steps()
            )));
        }
        Ok(())
    }

    /// Coefficients `(1/√α_t, (1−α_t)/√(1−ᾱ_t), √(1−α_t))` of a reverse step.
    pub fn reverse_coefficients(&self, t: usize) -> (f64, f64, f64) {
        let a = self.alpha(t);
        let ab = self.alpha_bar(t);
        (1.0 / a.sqrt(), (1.0 - a) / (1.0 - ab).sqrt(), (1.0 - a).sqrt())
    }
}

fn same_shape<T>(a: &Array2<T>, b: &Array2<T>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Contract(format!("{what} shape {:?} differs from {:?}", b.dim(), a.dim())));
    }
    Ok(())
}

/// `√ᾱ_t · Y0 + √(1−ᾱ_t) · ε`.
pub fn forward_diffuse<T: Scalar>(y0: &Array2<T>, t: usize, eps: &Array2<T>, s: &DiffusionSchedule) -> Result<Array2<T>> {
    s.check_step(t, 0)?;
    same_shape(y0, eps, "noise")?;
    let ab = s.alpha_bar(t);
    let a = T::lit(ab.sqrt());
    let b = T::lit((1.0 - ab).sqrt());
    Ok(y0.mapv(|v| v * a) + &eps.mapv(|v| v * b))
}

/// One reverse step from `Y^t` given the noise estimate and fresh noise `z`:
/// `(Y^t − (1−α_t)/√(1−ᾱ_t) · ε_θ) / √α_t + √(1−α_t) · z`.
pub fn denoise_step<T: Scalar>(
    y: &Array2<T>,
    eps_theta: &Array2<T>,
    t: usize,
    z: &Array2<T>,
    s: &DiffusionSchedule,
) -> Result<Array2<T>> {
    s.check_step(t, 1)?;
    same_shape(y, eps_theta, "noise estimate")?;
    same_shape(y, z, "fresh noise")?;
    let (c0, c1, c2) = s.reverse_coefficients(t);
    let (c0, c1, c2) = (T::lit(c0), T::lit(c1), T::lit(c2));
    let mut out = y.clone();
    ndarray::Zip::from(&mut out)
        .and(eps_theta)
        .and(z)
        .for_each(|o, &e, &zz| *o = c0 * (*o - c1 * e) + c2 * zz);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_step_schedule() {
        let s = make_schedule(1, 0.02, 0.02, 1).unwrap();
        assert_eq!(s.alpha_bar(1), 1.0 - 0.02);
        assert_eq!(s.alpha_bar(0), 1.0);
    }

    #[test]
    fn invalid_ranges_are_config_errors() {
        for (a, b) in [(0.0, 0.1), (0.2, 0.1), (0.1, 1.0), (-0.1, 0.5)] {
            assert!(matches!(make_schedule(10, a, b, 1), Err(Error::Config(_))));
        }
        assert!(matches!(make_schedule(10, 1e-4, 0.05, 11), Err(Error::Config(_))));
        assert!(make_schedule(0, 1e-4, 0.05, 0).is_err());
    }

    #[test]
    fn alpha_bar_strictly_decreases() {
        let s = make_schedule(100, 1e-4, 5e-2, 10).unwrap();
        for t in 1..=100 {
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            assert_eq!(s.alpha_bar(t), s.alpha_bar(t - 1) * s.alpha(t));
        }
    }

    #[test]
    fn step_zero_is_identity_and_zero_noise_scales() {
        let s = make_schedule(10, 1e-3, 1e-2, 5).unwrap();
        let y = array![[1.0, -2.0, 3.5]];
        let e = array![[0.3, 0.1, -0.7]];
        assert_eq!(forward_diffuse(&y, 0, &e, &s).unwrap(), y);
        let z = Array2::zeros((1, 3));
        let scaled = forward_diffuse(&y, 4, &z, &s).unwrap();
        let c = s.alpha_bar(4).sqrt();
        assert_eq!(scaled, y.mapv(|v| v * c));
        assert!(forward_diffuse(&y, 11, &e, &s).is_err());
    }

    #[test]
    fn zero_estimate_is_a_pure_rescale() {
        let s = make_schedule(10, 1e-3, 1e-2, 5).unwrap();
        let y = array![[2.0, 4.0]];
        let z = Array2::zeros((1, 2));
        let out = denoise_step(&y, &z, 3, &z, &s).unwrap();
        let c = 1.0 / s.alpha(3).sqrt();
        assert_eq!(out, y.mapv(|v| v * c));
        assert!(denoise_step(&y, &z, 0, &z, &s).is_err());
    }

    #[test]
    fn record_round_trip() {
        let s = make_schedule(20, 1e-4, 5e-2, 7).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: DiffusionSchedule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<DiffusionSchedule>(r#"{"betas":[0.5],"tau":3}"#).is_err());
    }
}
