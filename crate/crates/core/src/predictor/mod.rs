//! Maneuver probabilities, re-weighted mode contexts, the per-mode bivariate
//! Gaussian decoder, its likelihood and coarse sampling.

pub mod gaussian;
pub mod sampling;

pub use gaussian::{
    mixture_posterior, nll_loss, reweight_context, BivariateGaussian, ManeuverProbs, MixtureDensity,
    MultimodalDistribution, SIGMA_FLOOR,
};
pub use sampling::{sample_coarse, CoarseSamples, SamplingStrategy};

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Var};
use crate::data::maneuver::NUM_MODES;
use crate::nn::{Bound, Linear, Lstm, ParamSet};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub history: usize,
    pub future: usize,
    /// Width `d_c` of the incoming context.
    pub context: usize,
    pub decoder_hidden: usize,
    /// Decoder mean outputs are multiplied by this (meters per unit).
    pub mean_scale: f64,
    /// Per-mode softmax re-weighting of context rows; when off every mode
    /// sees the plain average of the rows.
    pub use_reweighting: bool,
}

/// Graph handles of one decoded mode.
#[derive(Debug, Clone, Copy)]
pub struct GaussianVars {
    /// `T_f × 2` means (meters, relative).
    pub mu: Var,
    /// `T_f × 2` standard deviations.
    pub sigma: Var,
    /// `T_f × 1` correlations.
    pub rho: Var,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultimodalPredictor {
    pub cfg: PredictorConfig,
    pub lateral: Linear,
    pub longitudinal: Linear,
    pub mode_scores: Linear,
    pub decoder: Lstm,
    pub decoder_out: Linear,
}

impl MultimodalPredictor {
    pub fn new<T: Scalar, R: Rng>(ps: &mut ParamSet<T>, cfg: PredictorConfig, rng: &mut R) -> Self {
        let dc = cfg.context;
        let out = Linear::new(ps, "decoder.out", cfg.decoder_hidden, 5, rng);
        // start near zero mean offset and unit σ
        ps.get_mut(out.w).mapv_inplace(|x| x * T::lit(0.1));
        Self {
            cfg,
            lateral: Linear::new(ps, "maneuver.lateral", dc, 3, rng),
            longitudinal: Linear::new(ps, "maneuver.longitudinal", dc, 2, rng),
            mode_scores: Linear::new(ps, "mode_weights", dc, NUM_MODES * cfg.future, rng),
            decoder: Lstm::new(ps, "decoder.lstm", 2 * dc + NUM_MODES, cfg.decoder_hidden, rng),
            decoder_out: out,
        }
    }

    /// Mean-pooled context row, `1 × d_c`.
    pub fn pool<T: Scalar>(&self, g: &mut Graph<T>, context: Var) -> Var {
        g.mean_rows(context)
    }

    /// Log-probabilities of the lateral (`1×3`) and longitudinal (`1×2`) heads.
    pub fn maneuver_log_probs<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, pooled: Var) -> (Var, Var) {
        let lat = self.lateral.forward(g, p, pooled);
        let lon = self.longitudinal.forward(g, p, pooled);
        (g.log_softmax_rows(lat), g.log_softmax_rows(lon))
    }

    /// Six `T_h × T_f` weight matrices, each column a softmax over history steps.
    pub fn mode_weights<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, context: Var) -> Vec<Var> {
        let tf = self.cfg.future;
        let scores = self.mode_scores.forward(g, p, context);
        let weights = g.softmax_cols(scores);
        (0..NUM_MODES).map(|m| g.slice_cols(weights, m * tf, (m + 1) * tf)).collect()
    }

    /// `V_i = u_iᵀ C`, `T_f × d_c`.
    pub fn reweight<T: Scalar>(&self, g: &mut Graph<T>, context: Var, weights: Var) -> Var {
        let ut = g.transpose(weights);
        g.matmul(ut, context)
    }

    /// Per-mode reweighted contexts (`T_f × d_c` each) for `modes`.
    pub fn mode_contexts<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, context: Var, modes: &[usize]) -> Vec<Var> {
        if self.cfg.use_reweighting {
            let weights = self.mode_weights(g, p, context);
            modes.iter().map(|&m| self.reweight(g, context, weights[m])).collect()
        } else {
            let th = self.cfg.history;
            let avg = g.constant(Array2::from_elem((self.cfg.future, th), T::one() / T::lit(th as f64)));
            let v = g.matmul(avg, context);
            vec![v; modes.len()]
        }
    }

    /// Runs the decoder LSTM for the requested modes in one batch and maps
    /// its raw outputs to `(μ, σ = exp, ρ = tanh)`. `cv` is the `T_f × 2`
    /// constant-velocity offset added to every mean.
    pub fn decode<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &Bound,
        mode_contexts: &[Var],
        pooled: Var,
        modes: &[usize],
        cv: Var,
    ) -> Vec<GaussianVars> {
        let m = modes.len();
        let tf = self.cfg.future;
        let stacked = g.concat_rows(mode_contexts);
        let ones = g.constant(Array2::ones((m, 1)));
        let pooled_rows = g.matmul(ones, pooled);
        let mut onehot = Array2::zeros((m, NUM_MODES));
        for (r, &mode) in modes.iter().enumerate() {
            onehot[[r, mode]] = T::one();
        }
        let onehot = g.constant(onehot);
        let mut state = self.decoder.zero_state(g, m);
        let mut outputs = Vec::with_capacity(tf);
        for step in 0..tf {
            let rows: Vec<usize> = (0..m).map(|r| r * tf + step).collect();
            let v = g.select_rows(stacked, &rows);
            let x = g.concat_cols(&[v, pooled_rows, onehot]);
            state = self.decoder.step(g, p, x, state);
            outputs.push(self.decoder_out.forward(g, p, state.0));
        }
        let all = g.concat_rows(&outputs);
        (0..m)
            .map(|r| {
                let rows: Vec<usize> = (0..tf).map(|step| step * m + r).collect();
                let raw = g.select_rows(all, &rows);
                self.activate(g, raw, cv)
            })
            .collect()
    }

    /// Maps a `T_f × 5` raw block to Gaussian parameters.
    pub fn activate<T: Scalar>(&self, g: &mut Graph<T>, raw: Var, cv: Var) -> GaussianVars {
        let mu_raw = g.slice_cols(raw, 0, 2);
        let mu_scaled = g.scale(mu_raw, T::lit(self.cfg.mean_scale));
        let mu = g.add(mu_scaled, cv);
        let s = g.slice_cols(raw, 2, 4);
        let sigma = g.exp(s);
        let r = g.slice_cols(raw, 4, 5);
        let rho = g.tanh(r);
        GaussianVars { mu, sigma, rho }
    }
}

/// Negative log-likelihood of `truth` (`T_f × 2`) under one decoded mode,
/// minus `log_p_mode` (a 1×1 node). σ is floored at [`SIGMA_FLOOR`].
pub fn nll_graph<T: Scalar>(g: &mut Graph<T>, gv: GaussianVars, truth: Var, log_p_mode: Var) -> Var {
    let tf = g.shape(truth).0;
    let sigma = g.max_scalar(gv.sigma, T::lit(SIGMA_FLOOR));
    let d = g.sub(truth, gv.mu);
    let z = g.div(d, sigma);
    let zx = g.slice_cols(z, 0, 1);
    let zy = g.slice_cols(z, 1, 2);
    let zx2 = g.square(zx);
    let zy2 = g.square(zy);
    let cross = g.mul(zx, zy);
    let cross = g.mul(cross, gv.rho);
    let cross = g.scale(cross, T::lit(-2.0));
    let q = g.add(zx2, zy2);
    let q = g.add(q, cross);
    let r2 = g.square(gv.rho);
    let one_m = g.scale(r2, -T::one());
    let one_m = g.add_scalar(one_m, T::one());
    let one_m = g.max_scalar(one_m, T::lit(1e-12));
    let q = g.div(q, one_m);
    let log_one_m = g.log(one_m);
    let log_sigma = g.log(sigma);
    let s1 = g.sum_all(log_sigma);
    let s2 = g.sum_all(log_one_m);
    let s2 = g.scale(s2, T::lit(0.5));
    let s3 = g.sum_all(q);
    let s3 = g.scale(s3, T::lit(0.5));
    let total = g.add(s1, s2);
    let total = g.add(total, s3);
    let total = g.add_scalar(total, T::lit(tf as f64 * (2.0 * PI).ln()));
    g.sub(total, log_p_mode)
}

/// Reparameterised samples `μ + L·η` as a `K × 2T_f` matrix in planar
/// layout `[x_1 … x_T, y_1 … y_T]`. `eta1`, `eta2` are `K × T_f` draws.
pub fn reparameterized_samples<T: Scalar>(
    g: &mut Graph<T>,
    gv: GaussianVars,
    eta1: Array2<T>,
    eta2: Array2<T>,
) -> Var {
    let lim = T::lit(gaussian::RHO_LIMIT);
    let rho_c = g.transpose(gv.rho);
    let rho_c = g.tanh_clamp_guard(rho_c, lim);
    let mu_t = g.transpose(gv.mu);
    let sig_t = g.transpose(gv.sigma);
    let mux = g.slice_rows(mu_t, 0, 1);
    let muy = g.slice_rows(mu_t, 1, 2);
    let sx = g.slice_rows(sig_t, 0, 1);
    let sy = g.slice_rows(sig_t, 1, 2);
    let e1 = g.constant(eta1);
    let e2 = g.constant(eta2);
    let xs = g.mul_row(e1, sx);
    let xs = g.add_row(xs, mux);
    // y = μy + σy (ρ η1 + sqrt(1 − ρ²) η2)
    let r2 = g.square(rho_c);
    let c = g.scale(r2, -T::one());
    let c = g.add_scalar(c, T::one());
    let c = g.sqrt(c);
    let a = g.mul_row(e1, rho_c);
    let b = g.mul_row(e2, c);
    let ys = g.add(a, b);
    let ys = g.mul_row(ys, sy);
    let ys = g.add_row(ys, muy);
    g.concat_cols(&[xs, ys])
}

impl<T: Scalar> Graph<T> {
    /// Clamps values into `[-lim, lim]` (zero gradient where clamped).
    pub fn tanh_clamp_guard(&mut self, a: Var, lim: T) -> Var {
        let lo = self.max_scalar(a, -lim);
        let neg = self.neg(lo);
        let hi = self.max_scalar(neg, -lim);
        self.neg(hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traj::to_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixed(g: &mut Graph<f64>, mu: Array2<f64>, sigma: Array2<f64>, rho: Array2<f64>) -> GaussianVars {
        GaussianVars {
            mu: g.param(mu),
            sigma: g.param(sigma),
            rho: g.param(rho),
        }
    }

    #[test]
    fn graph_nll_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tf = 6;
        let mu = Array2::from_shape_fn((tf, 2), |_| rng.gen_range(-3.0..3.0));
        let sigma = Array2::from_shape_fn((tf, 2), |_| rng.gen_range(0.2..2.0));
        let rho = Array2::from_shape_fn((tf, 1), |_| rng.gen_range(-0.9..0.9));
        let truth: Vec<[f64; 2]> = (0..tf).map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]).collect();
        let mut g = Graph::new();
        let gv = fixed(&mut g, mu.clone(), sigma.clone(), rho.clone());
        let t = g.constant(to_matrix(&truth));
        let lp = g.constant(Array2::from_elem((1, 1), 0.3f64.ln()));
        let loss = nll_graph(&mut g, gv, t, lp);
        let bg = BivariateGaussian {
            mu: (0..tf).map(|i| [mu[[i, 0]], mu[[i, 1]]]).collect(),
            sigma: (0..tf).map(|i| [sigma[[i, 0]], sigma[[i, 1]]]).collect(),
            rho: (0..tf).map(|i| rho[[i, 0]]).collect(),
        };
        let expect = -(bg.log_density(&truth) + 0.3f64.ln());
        assert!((g.scalar(loss) - expect).abs() < 1e-9 * expect.abs().max(1.0));
    }

    #[test]
    fn mean_gradient_vanishes_at_truth() {
        let tf = 4;
        let truth = Array2::from_shape_fn((tf, 2), |(i, j)| i as f64 - j as f64 * 0.5);
        let mut g = Graph::new();
        let gv = fixed(
            &mut g,
            truth.clone(),
            Array2::from_elem((tf, 2), 0.7),
            Array2::from_elem((tf, 1), 0.4),
        );
        let t = g.constant(truth);
        let lp = g.constant(Array2::zeros((1, 1)));
        let loss = nll_graph(&mut g, gv, t, lp);
        let grads = g.backward(loss);
        assert!(grads.get(gv.mu).unwrap().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_raw_channels_give_unit_sigma_and_zero_rho() {
        let cfg = PredictorConfig {
            history: 3,
            future: 2,
            context: 4,
            decoder_hidden: 5,
            mean_scale: 10.0,
            use_reweighting: true,
        };
        let mut ps = ParamSet::<f64>::new();
        let model = MultimodalPredictor::new(&mut ps, cfg, &mut ChaCha8Rng::seed_from_u64(0));
        let mut g = Graph::new();
        let raw = g.constant(Array2::zeros((2, 5)));
        let cv = g.constant(Array2::from_elem((2, 2), 1.5));
        let gv = model.activate(&mut g, raw, cv);
        assert!(g.value(gv.sigma).iter().all(|&s| s == 1.0));
        assert!(g.value(gv.rho).iter().all(|&r| r == 0.0));
        assert!(g.value(gv.mu).iter().all(|&m| m == 1.5));
    }

    #[test]
    fn mode_weight_columns_are_distributions() {
        let cfg = PredictorConfig {
            history: 5,
            future: 3,
            context: 4,
            decoder_hidden: 6,
            mean_scale: 1.0,
            use_reweighting: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut ps = ParamSet::<f64>::new();
        let model = MultimodalPredictor::new(&mut ps, cfg, &mut rng);
        let mut g = Graph::new();
        let p = ps.bind(&mut g, false);
        let c = g.constant(Array2::from_shape_fn((5, 4), |_| rng.gen_range(-2.0..2.0)));
        let weights = model.mode_weights(&mut g, &p, c);
        assert_eq!(weights.len(), NUM_MODES);
        for w in weights {
            let w = g.value(w);
            assert_eq!(w.dim(), (5, 3));
            for col in w.columns() {
                assert!((col.sum() - 1.0).abs() < 1e-12);
                assert!(col.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn graph_samples_match_pointwise_reparameterization() {
        let tf = 3;
        let mu = Array2::from_shape_fn((tf, 2), |(i, j)| i as f64 + 0.1 * j as f64);
        let sigma = Array2::from_shape_fn((tf, 2), |(i, j)| 0.5 + 0.2 * (i + j) as f64);
        let rho = Array2::from_shape_fn((tf, 1), |(i, _)| -0.3 + 0.25 * i as f64);
        let e1 = Array2::from_shape_fn((2, tf), |(k, t)| (k as f64 - 0.5) * (t as f64 + 1.0));
        let e2 = Array2::from_shape_fn((2, tf), |(k, t)| 0.3 * k as f64 - 0.1 * t as f64);
        let mut g = Graph::new();
        let gv = fixed(&mut g, mu.clone(), sigma.clone(), rho.clone());
        let s = reparameterized_samples(&mut g, gv, e1.clone(), e2.clone());
        let s = g.value(s);
        for k in 0..2 {
            for t in 0..tf {
                let p = gaussian::reparameterize(
                    [mu[[t, 0]], mu[[t, 1]]],
                    [sigma[[t, 0]], sigma[[t, 1]]],
                    rho[[t, 0]],
                    e1[[k, t]],
                    e2[[k, t]],
                );
                assert!((s[[k, t]] - p[0]).abs() < 1e-12);
                assert!((s[[k, tf + t]] - p[1]).abs() < 1e-12);
            }
        }
    }
}
