use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An agent in the complex domain: `z ⊙ e^{iθ}` elementwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentWave<T> {
    pub amplitude: Vec<T>,
    pub phase: Vec<T>,
}

impl<T: Scalar> AgentWave<T> {
    pub fn new(amplitude: Vec<T>, phase: Vec<T>) -> Self {
        assert_eq!(amplitude.len(), phase.len(), "amplitude/phase width mismatch");
        Self { amplitude, phase }
    }

    pub fn width(&self) -> usize {
        self.amplitude.len()
    }

    /// Real part `z ⊙ cos θ`.
    pub fn real(&self) -> impl Iterator<Item = T> + '_ {
        self.amplitude.iter().zip(&self.phase).map(|(&z, &t)| z * t.cos())
    }

    /// Imaginary part `z ⊙ sin θ`.
    pub fn imag(&self) -> impl Iterator<Item = T> + '_ {
        self.amplitude.iter().zip(&self.phase).map(|(&z, &t)| z * t.sin())
    }
}

/// Superposes two waves elementwise, returning `(z_r, θ_r)`.
///
/// `z_r = sqrt(z_i² + z_j² + 2 z_i z_j cos(θ_j − θ_i))` and
/// `θ_r = θ_i + atan2(z_j sin(θ_j − θ_i), z_i + z_j cos(θ_j − θ_i))`.
/// When `z_r` is exactly zero the phase is defined as `θ_i`.
pub fn superpose_waves<T: Scalar>(zi: &[T], ti: &[T], zj: &[T], tj: &[T]) -> (Vec<T>, Vec<T>) {
    assert!(
        zi.len() == ti.len() && zi.len() == zj.len() && zi.len() == tj.len(),
        "superpose_waves width mismatch"
    );
    let two = T::lit(2.0);
    zi.iter()
        .zip(ti)
        .zip(zj.iter().zip(tj))
        .map(|((&zi, &ti), (&zj, &tj))| {
            let d = tj - ti;
            let (s, c) = d.sin_cos();
            let zr = (zi * zi + zj * zj + two * zi * zj * c).max(T::zero()).sqrt();
            let tr = if zr == T::zero() { ti } else { ti + (zj * s).atan2(zi + zj * c) };
            (zr, tr)
        })
        .unzip()
}

/// Surrounding-FC token mixing over `n` agent waves.
///
/// `o_j = b + Σ_{k: mask_k} W^t_{jk} z_k ⊙ cos θ_k + W^i_{jk} z_k ⊙ sin θ_k`.
/// Unoccupied slots are skipped entirely, so an all-masked input returns the
/// bias for every output.
pub fn surrounding_fc<T: Scalar>(
    waves: &[AgentWave<T>],
    mask: &[bool],
    w_real: &Array2<T>,
    w_imag: &Array2<T>,
    bias: &[T],
) -> Result<Vec<Vec<T>>> {
    let n = waves.len();
    if mask.len() != n || w_real.dim() != (n, n) || w_imag.dim() != (n, n) {
        return Err(Error::Contract(format!(
            "surrounding_fc: {n} waves, {} mask entries, weights {:?}/{:?}",
            mask.len(),
            w_real.dim(),
            w_imag.dim()
        )));
    }
    let d = bias.len();
    if waves.iter().any(|w| w.width() != d) {
        return Err(Error::Contract("surrounding_fc: wave width differs from bias".into()));
    }
    let parts: Vec<(Vec<T>, Vec<T>)> = waves
        .iter()
        .map(|w| (w.real().collect(), w.imag().collect()))
        .collect();
    Ok((0..n)
        .map(|j| {
            let mut o = bias.to_vec();
            for (k, (re, im)) in parts.iter().enumerate() {
                if !mask[k] {
                    continue;
                }
                let (a, b) = (w_real[[j, k]], w_imag[[j, k]]);
                for ((o, &r), &i) in o.iter_mut().zip(re).zip(im) {
                    *o += a * r + b * i;
                }
            }
            o
        })
        .collect())
}
