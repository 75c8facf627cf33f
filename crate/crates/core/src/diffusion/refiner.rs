use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::schedule::{forward_diffuse, DiffusionSchedule};
use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::model::SceneInput;
use crate::nn::{multi_head_self_attention, sinusoidal_embedding, Bound, LayerNorm, Linear, ParamId, ParamSet};
use crate::scalar::Scalar;
use crate::traj::{flatten_planar, unflatten_planar, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinerConfig {
    pub history: usize,
    pub future: usize,
    /// Per-agent transformer width.
    pub width: usize,
    pub heads: usize,
    pub feedforward: usize,
    /// Width of the conditioning vector χ.
    pub context: usize,
    /// Hidden width of the noise estimator.
    pub hidden: usize,
    pub step_embedding: usize,
    /// Meters per unit for history inputs.
    pub position_scale: f64,
    /// Meters per unit of the diffusion state.
    pub state_scale: f64,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        Self {
            history: 15,
            future: 25,
            width: 32,
            heads: 4,
            feedforward: 64,
            context: 64,
            hidden: 128,
            step_embedding: 32,
            position_scale: 10.0,
            state_scale: 1.0,
        }
    }
}

impl RefinerConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("history", self.history),
            ("future", self.future),
            ("width", self.width),
            ("heads", self.heads),
            ("feedforward", self.feedforward),
            ("context", self.context),
            ("hidden", self.hidden),
            ("step_embedding", self.step_embedding),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::Config(format!("refiner {name} must be positive")));
            }
        }
        if !self.width.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "refiner width {} is not divisible by {} heads",
                self.width, self.heads
            )));
        }
        if !(self.position_scale > 0.0 && self.state_scale > 0.0) {
            return Err(Error::Config("refiner scales must be positive".into()));
        }
        Ok(())
    }

    /// Length of a flattened future, `2 T_f`.
    pub fn state_width(&self) -> usize {
        2 * self.future
    }
}

/// Transformer layer applied to each agent's history, pooled into χ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextEncoder {
    pub embed: Linear,
    pub query: ParamId,
    pub key: ParamId,
    pub value: ParamId,
    pub norm_attn: LayerNorm,
    pub ff_in: Linear,
    pub ff_out: Linear,
    pub norm_ff: LayerNorm,
    pub project: Linear,
}

/// MLP over `[Y ‖ χ ‖ step embedding]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimator {
    pub input: Linear,
    pub hidden: Linear,
    pub output: Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refiner {
    pub cfg: RefinerConfig,
    pub encoder: ContextEncoder,
    pub noise: NoiseEstimator,
}

/// Timesteps and standard-normal draws for one noise-estimation batch.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw<T> {
    /// Diffusion step per batch element, in `1..=T`.
    pub steps: Vec<usize>,
    /// `B × 2T_f` noise.
    pub eps: Array2<T>,
}

impl<T: Scalar> NoiseDraw<T> {
    pub fn sample<R: Rng>(rng: &mut R, batch: usize, width: usize, schedule: &DiffusionSchedule) -> Self {
        let steps = (0..batch).map(|_| rng.gen_range(1..=schedule.steps())).collect();
        let eps = Array2::from_shape_simple_fn((batch, width), || T::lit(rng.sample::<f64, _>(StandardNormal)));
        Self { steps, eps }
    }
}

fn standard_normal<T: Scalar, R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<T> {
    Array2::from_shape_simple_fn((rows, cols), || T::lit(rng.sample::<f64, _>(StandardNormal)))
}

impl Refiner {
    pub fn new<T: Scalar, R: Rng>(ps: &mut ParamSet<T>, cfg: RefinerConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let w = cfg.width;
        let encoder = ContextEncoder {
            embed: Linear::new(ps, "refiner.embed", 2, w, rng),
            query: ps.add_glorot("refiner.attn.query", w, w, rng),
            key: ps.add_glorot("refiner.attn.key", w, w, rng),
            value: ps.add_glorot("refiner.attn.value", w, w, rng),
            norm_attn: LayerNorm::new(ps, "refiner.attn.norm", w),
            ff_in: Linear::new(ps, "refiner.ff.in", w, cfg.feedforward, rng),
            ff_out: Linear::new(ps, "refiner.ff.out", cfg.feedforward, w, rng),
            norm_ff: LayerNorm::new(ps, "refiner.ff.norm", w),
            project: Linear::new(ps, "refiner.project", 2 * w, cfg.context, rng),
        };
        let sw = cfg.state_width();
        let noise = NoiseEstimator {
            input: Linear::new(ps, "refiner.noise.input", sw + cfg.context + cfg.step_embedding, cfg.hidden, rng),
            hidden: Linear::new(ps, "refiner.noise.hidden", cfg.hidden, cfg.hidden, rng),
            output: Linear::new(ps, "refiner.noise.output", cfg.hidden, sw, rng),
        };
        Ok(Self { cfg, encoder, noise })
    }

    pub fn init<T: Scalar>(cfg: RefinerConfig, seed: u64) -> Result<(Self, ParamSet<T>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        let r = Self::new(&mut ps, cfg, &mut rng)?;
        Ok((r, ps))
    }

    fn positional<T: Scalar>(&self) -> Array2<T> {
        let (th, w) = (self.cfg.history, self.cfg.width);
        let mut m = Array2::zeros((th, w));
        for t in 0..th {
            for (j, v) in sinusoidal_embedding(t as f64, w).into_iter().enumerate() {
                m[[t, j]] = T::lit(v);
            }
        }
        m
    }

    /// One agent's history (`T_h × 2`, meters) to a `1 × width` summary.
    fn encode_agent<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, history: &Trajectory<T>, pos: Var) -> Var {
        let e = &self.encoder;
        let s = T::lit(self.cfg.position_scale);
        let x = g.constant(Array2::from_shape_fn((history.len(), 2), |(t, c)| history[t][c] / s));
        let h = e.embed.forward(g, p, x);
        let h = g.add(h, pos);
        let (att, _) = multi_head_self_attention(g, h, p[e.query], p[e.key], p[e.value], self.cfg.heads);
        let h = g.add(h, att);
        let h = e.norm_attn.forward(g, p, h);
        let f = e.ff_in.forward(g, p, h);
        let f = g.silu(f);
        let f = e.ff_out.forward(g, p, f);
        let h = g.add(h, f);
        let h = e.norm_ff.forward(g, p, h);
        g.mean_rows(h)
    }

    /// χ for one scene, `1 × context`: the target summary concatenated with
    /// the mean summary over occupied cells (zeros when there are none).
    pub fn encode_context<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, scene: &SceneInput<T>) -> Var {
        let pos = g.constant(self.positional());
        let target = self.encode_agent(g, p, &scene.target_history, pos);
        let social = if scene.neighbor_histories.is_empty() {
            g.constant(Array2::zeros((1, self.cfg.width)))
        } else {
            let rows: Vec<Var> = scene
                .neighbor_histories
                .iter()
                .map(|h| self.encode_agent(g, p, h, pos))
                .collect();
            let all = g.concat_rows(&rows);
            g.mean_rows(all)
        };
        let cat = g.concat_cols(&[target, social]);
        self.encoder.project.forward(g, p, cat)
    }

    /// χ values without gradient tracking.
    pub fn context_values<T: Scalar>(&self, params: &ParamSet<T>, scene: &SceneInput<T>) -> Array2<T> {
        let mut g = Graph::new();
        let p = params.bind(&mut g, false);
        let chi = self.encode_context(&mut g, &p, scene);
        g.value(chi).clone()
    }

    /// Noise estimate for every row of `y` (`R × 2T_f`). `chi` is `R × context`
    /// or a single row shared by all; `steps[r]` is row `r`'s diffusion step.
    pub fn estimate_noise<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, y: Var, chi: Var, steps: &[usize]) -> Var {
        let rows = g.shape(y).0;
        assert_eq!(steps.len(), rows, "one step per row");
        let chi = if g.shape(chi).0 == rows {
            chi
        } else {
            let ones = g.constant(Array2::ones((rows, 1)));
            g.matmul(ones, chi)
        };
        let width = self.cfg.step_embedding;
        let mut emb = Array2::zeros((rows, width));
        for (r, &t) in steps.iter().enumerate() {
            for (j, v) in sinusoidal_embedding(t as f64, width).into_iter().enumerate() {
                emb[[r, j]] = T::lit(v);
            }
        }
        let emb = g.constant(emb);
        let n = &self.noise;
        let x = g.concat_cols(&[y, chi, emb]);
        let h = n.input.forward(g, p, x);
        let h = g.silu(h);
        let h = n.hidden.forward(g, p, h);
        let h = g.silu(h);
        n.output.forward(g, p, h)
    }

    /// Flattened diffusion state of a trajectory: `(Y − prior) / state_scale`.
    pub fn to_state<T: Scalar>(&self, traj: &[[T; 2]], prior: &[[T; 2]]) -> Vec<T> {
        let s = T::lit(self.cfg.state_scale);
        let rel: Vec<[T; 2]> = traj
            .iter()
            .zip(prior)
            .map(|(a, b)| [(a[0] - b[0]) / s, (a[1] - b[1]) / s])
            .collect();
        flatten_planar(&rel)
    }

    pub fn from_state<T: Scalar>(&self, state: &[T], prior: &[[T; 2]]) -> Trajectory<T> {
        let s = T::lit(self.cfg.state_scale);
        unflatten_planar(state)
            .into_iter()
            .zip(prior)
            .map(|(a, b)| [a[0] * s + b[0], a[1] * s + b[1]])
            .collect()
    }

    /// Prior in planar layout scaled into state units, `1 × 2T_f`.
    fn prior_row<T: Scalar>(&self, prior: &[[T; 2]]) -> Array2<T> {
        let s = T::lit(self.cfg.state_scale);
        let flat = flatten_planar(prior);
        Array2::from_shape_fn((1, flat.len()), |(_, j)| flat[j] / s)
    }

    /// Reverse diffusion of the state rows `y` from step `tau` down to 1 on
    /// the graph. `noise[i]` is the fresh noise for step `tau − i` (the last
    /// step uses none).
    #[allow(clippy::too_many_arguments)]
    pub fn denoise_graph<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &Bound,
        mut y: Var,
        chi: Var,
        schedule: &DiffusionSchedule,
        tau: usize,
        noise: &[Array2<T>],
    ) -> Var {
        let rows = g.shape(y).0;
        for (i, t) in (1..=tau).rev().enumerate() {
            let eps = self.estimate_noise(g, p, y, chi, &vec![t; rows]);
            let (c0, c1, c2) = schedule.reverse_coefficients(t);
            let e = g.scale(eps, T::lit(c1));
            let d = g.sub(y, e);
            y = g.scale(d, T::lit(c0));
            if t > 1 {
                let z = g.constant(noise[i].mapv(|v| v * T::lit(c2)));
                y = g.add(y, z);
            }
        }
        y
    }

    /// Maps trajectories (rows `K × 2T_f` in meters, planar) through the
    /// refinement loop on the graph.
    #[allow(clippy::too_many_arguments)]
    pub fn refine_graph<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &Bound,
        samples: Var,
        prior: &[[T; 2]],
        chi: Var,
        schedule: &DiffusionSchedule,
        tau: usize,
        noise: &[Array2<T>],
    ) -> Var {
        let prior_row = g.constant(self.prior_row(prior));
        let inv = T::one() / T::lit(self.cfg.state_scale);
        let scaled = g.scale(samples, inv);
        let y = g.scale(prior_row, -T::one());
        let y = g.add_row(scaled, y);
        let y = self.denoise_graph(g, p, y, chi, schedule, tau, noise);
        let y = g.scale(y, T::lit(self.cfg.state_scale));
        let back = g.scale(prior_row, T::lit(self.cfg.state_scale));
        g.add_row(y, back)
    }

    /// Refines coarse samples, each treated as the diffusion state at step
    /// `τ`. Each sample's fresh noise comes from a stream keyed by `seed` and
    /// the sample's own values, so samples are refined independently of
    /// their order.
    #[allow(clippy::too_many_arguments)]
    pub fn refine<T: Scalar>(
        &self,
        params: &ParamSet<T>,
        samples: &[Trajectory<T>],
        prior: &[[T; 2]],
        chi: &Array2<T>,
        schedule: &DiffusionSchedule,
        tau: usize,
        seed: u64,
    ) -> Result<Vec<Trajectory<T>>> {
        if tau > schedule.steps() {
            return Err(Error::Config(format!(
                "tau {tau} exceeds the {} diffusion steps",
                schedule.steps()
            )));
        }
        if tau == 0 || samples.is_empty() {
            return Ok(samples.to_vec());
        }
        let width = self.cfg.state_width();
        let k = samples.len();
        let mut flat = Array2::zeros((k, width));
        let mut noise = vec![Array2::zeros((k, width)); tau];
        for (r, s) in samples.iter().enumerate() {
            let row = flatten_planar(s);
            if row.len() != width {
                return Err(Error::Contract(format!(
                    "sample has {} steps, refiner expects {}",
                    s.len(),
                    self.cfg.future
                )));
            }
            for (j, v) in row.iter().enumerate() {
                flat[[r, j]] = *v;
            }
            let mut rng = sample_stream(seed, &row);
            for z in noise.iter_mut().take(tau - 1) {
                for j in 0..width {
                    z[[r, j]] = T::lit(rng.sample::<f64, _>(StandardNormal));
                }
            }
        }
        let mut g = Graph::new();
        let p = params.bind(&mut g, false);
        let x = g.constant(flat);
        let chi = g.constant(chi.clone());
        let out = self.refine_graph(&mut g, &p, x, prior, chi, schedule, tau, &noise);
        let out = g.value(out);
        Ok(out.rows().into_iter().map(|r| unflatten_planar(&r.to_vec())).collect())
    }

    /// Fresh-noise draws for graph refinement of `rows` samples.
    pub fn draw_refine_noise<T: Scalar, R: Rng>(&self, rng: &mut R, rows: usize, tau: usize) -> Vec<Array2<T>> {
        (0..tau).map(|_| standard_normal(rng, rows, self.cfg.state_width())).collect()
    }

    /// Per-element `‖ε − f_ε(Y^t, χ, t)‖₂` averaged over the batch (or the
    /// squared norm when `squared`). Row `b` of `chi` conditions scene `b`.
    #[allow(clippy::too_many_arguments)]
    pub fn noise_loss_graph<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &Bound,
        scenes: &[&SceneInput<T>],
        chi: Var,
        schedule: &DiffusionSchedule,
        draw: &NoiseDraw<T>,
        squared: bool,
    ) -> Result<Var> {
        if scenes.is_empty() {
            return Err(Error::Config("noise estimation needs a nonempty batch".into()));
        }
        let width = self.cfg.state_width();
        let mut noisy = Array2::zeros((scenes.len(), width));
        for (b, scene) in scenes.iter().enumerate() {
            let future = scene
                .future
                .as_ref()
                .ok_or_else(|| Error::Contract("scene has no ground-truth future".into()))?;
            let y0 = Array2::from_shape_vec((1, width), self.to_state(future, &scene.prior))
                .map_err(|e| Error::Contract(e.to_string()))?;
            let eps = draw.eps.slice(ndarray::s![b..b + 1, ..]).to_owned();
            let yt = forward_diffuse(&y0, draw.steps[b], &eps, schedule)?;
            noisy.row_mut(b).assign(&yt.row(0));
        }
        let y = g.constant(noisy);
        let pred = self.estimate_noise(g, p, y, chi, &draw.steps);
        let eps = g.constant(draw.eps.clone());
        let r = g.sub(eps, pred);
        let per = if squared {
            let sq = g.square(r);
            let ones = g.constant(Array2::ones((width, 1)));
            g.matmul(sq, ones)
        } else {
            g.row_norms(r)
        };
        Ok(g.mean_all(per))
    }

    /// Noise-estimation loss of a batch with χ encoded on the graph.
    pub fn noise_estimation_loss<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &Bound,
        scenes: &[&SceneInput<T>],
        schedule: &DiffusionSchedule,
        draw: &NoiseDraw<T>,
        squared: bool,
    ) -> Result<Var> {
        if scenes.is_empty() {
            return Err(Error::Config("noise estimation needs a nonempty batch".into()));
        }
        let rows: Vec<Var> = scenes.iter().map(|s| self.encode_context(g, p, s)).collect();
        let chi = g.concat_rows(&rows);
        self.noise_loss_graph(g, p, scenes, chi, schedule, draw, squared)
    }
}

/// Random stream for one sample, keyed by the seed and the sample's bits.
fn sample_stream<T: Scalar>(seed: u64, row: &[T]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for v in row {
        h.update(v.as_f64().to_bits().to_le_bytes());
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}
