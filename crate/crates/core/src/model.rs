//! The interaction stage: wave-pooled context encoder plus the re-weighted
//! multimodal Gaussian predictor, with per-scene inputs built from windows.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Var};
use crate::data::maneuver::NUM_MODES;
use crate::data::SceneWindow;
use crate::error::{Error, Result};
use crate::nn::{Bound, ParamSet};
use crate::predictor::{
    nll_graph, BivariateGaussian, GaussianVars, ManeuverProbs, MultimodalDistribution, MultimodalPredictor,
    PredictorConfig,
};
use crate::scalar::Scalar;
use crate::traj::{constant_velocity, convert, to_matrix, Point, Trajectory};
use crate::wave::{ContextVars, WaveConfig, WaveInteraction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionConfig {
    pub history: usize,
    pub future: usize,
    pub hidden: usize,
    pub embed: usize,
    pub heads: usize,
    pub context: usize,
    pub decoder_hidden: usize,
    /// Meters per network unit for positions in and means out.
    pub position_scale: f64,
    pub use_pooling: bool,
    pub use_reweighting: bool,
}

impl Default for InteractionConfig {
    fn default() -> Self {
        Self {
            history: 15,
            future: 25,
            hidden: 32,
            embed: 32,
            heads: 4,
            context: 64,
            decoder_hidden: 64,
            position_scale: 10.0,
            use_pooling: true,
            use_reweighting: true,
        }
    }
}

impl InteractionConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("history", self.history),
            ("future", self.future),
            ("hidden", self.hidden),
            ("embed", self.embed),
            ("heads", self.heads),
            ("context", self.context),
            ("decoder_hidden", self.decoder_hidden),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "hidden width {} is not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        if !(self.position_scale > 0.0) {
            return Err(Error::Config("position_scale must be positive".into()));
        }
        Ok(())
    }

    pub fn wave(&self) -> WaveConfig {
        WaveConfig {
            hidden: self.hidden,
            embed: self.embed,
            heads: self.heads,
            context: self.context,
            use_pooling: self.use_pooling,
        }
    }

    pub fn predictor(&self) -> PredictorConfig {
        PredictorConfig {
            history: self.history,
            future: self.future,
            context: self.context,
            decoder_hidden: self.decoder_hidden,
            mean_scale: self.position_scale,
            use_reweighting: self.use_reweighting,
        }
    }
}

/// Model inputs for one target: histories relative to the target's last
/// observed position, occupied grid cells and (optionally) the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneInput<T> {
    pub target_history: Trajectory<T>,
    /// One history per occupied cell, ordered as `cells`.
    pub neighbor_histories: Vec<Trajectory<T>>,
    pub cells: Vec<usize>,
    pub future: Option<Trajectory<T>>,
    /// Labelled maneuver mode.
    pub mode: usize,
    /// Constant-velocity extrapolation used as the mean offset.
    pub prior: Trajectory<T>,
}

impl<T: Scalar> SceneInput<T> {
    pub fn from_window(w: &SceneWindow) -> Self {
        let target_history: Trajectory<T> = convert(&w.target_history);
        let prior = constant_velocity(&target_history, w.future_len());
        Self {
            neighbor_histories: w.neighbors.iter().map(|n| convert(&n.history)).collect(),
            cells: w.neighbors.iter().map(|n| n.cell.index()).collect(),
            future: if w.target_future.is_empty() {
                None
            } else {
                Some(convert(&w.target_future))
            },
            mode: w.label().mode_index(),
            prior,
            target_history,
        }
    }

    pub fn check(&self, cfg: &InteractionConfig) -> Result<()> {
        if self.target_history.len() != cfg.history {
            return Err(Error::Contract(format!(
                "target history has {} steps, model expects {}",
                self.target_history.len(),
                cfg.history
            )));
        }
        if self.neighbor_histories.len() != self.cells.len() {
            return Err(Error::Contract("one grid cell per neighbor history required".into()));
        }
        if let Some(n) = self.neighbor_histories.iter().find(|h| h.len() != cfg.history) {
            return Err(Error::Contract(format!(
                "neighbor history has {} steps, model expects {}",
                n.len(),
                cfg.history
            )));
        }
        if let Some(f) = &self.future {
            if f.len() != cfg.future {
                return Err(Error::Contract(format!(
                    "future has {} steps, model expects {}",
                    f.len(),
                    cfg.future
                )));
            }
        }
        if self.prior.len() != cfg.future {
            return Err(Error::Contract("prior length differs from the future horizon".into()));
        }
        Ok(())
    }
}

/// Graph handles of one scene's forward pass up to the maneuver heads.
#[derive(Debug, Clone)]
pub struct SceneForward {
    pub context: ContextVars,
    pub pooled: Var,
    /// `1 × 3` lateral log-probabilities.
    pub lateral: Var,
    /// `1 × 2` longitudinal log-probabilities.
    pub longitudinal: Var,
    pub prior: Var,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionModel {
    pub cfg: InteractionConfig,
    pub wave: WaveInteraction,
    pub predictor: MultimodalPredictor,
}

impl InteractionModel {
    pub fn new<T: Scalar, R: Rng>(ps: &mut ParamSet<T>, cfg: InteractionConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            wave: WaveInteraction::new(ps, cfg.wave(), rng),
            predictor: MultimodalPredictor::new(ps, cfg.predictor(), rng),
        })
    }

    /// Builds a fresh parameter set for `cfg` (weights from `seed`).
    pub fn init<T: Scalar>(cfg: InteractionConfig, seed: u64) -> Result<(Self, ParamSet<T>)> {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        let model = Self::new(&mut ps, cfg, &mut rng)?;
        Ok((model, ps))
    }

    fn scaled_steps<T: Scalar>(&self, g: &mut Graph<T>, histories: &[&Trajectory<T>]) -> Vec<Var> {
        let s = T::lit(self.cfg.position_scale);
        (0..self.cfg.history)
            .map(|t| {
                let m = Array2::from_shape_fn((histories.len(), 2), |(r, c)| histories[r][t][c] / s);
                g.constant(m)
            })
            .collect()
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, scene: &SceneInput<T>) -> Result<SceneForward> {
        scene.check(&self.cfg)?;
        let target = self.scaled_steps(g, &[&scene.target_history]);
        let neighbors = if scene.neighbor_histories.is_empty() {
            Vec::new()
        } else {
            let refs: Vec<&Trajectory<T>> = scene.neighbor_histories.iter().collect();
            self.scaled_steps(g, &refs)
        };
        let context = self.wave.context(g, p, &target, &neighbors, &scene.cells);
        let pooled = self.predictor.pool(g, context.context);
        let (lateral, longitudinal) = self.predictor.maneuver_log_probs(g, p, pooled);
        let prior = g.constant(to_matrix(&scene.prior));
        Ok(SceneForward {
            context,
            pooled,
            lateral,
            longitudinal,
            prior,
        })
    }

    /// `log P(m)` of a joint mode as a 1×1 node.
    pub fn mode_log_prob<T: Scalar>(&self, g: &mut Graph<T>, fwd: &SceneForward, mode: usize) -> Var {
        let lat = g.slice_cols(fwd.lateral, mode / 2, mode / 2 + 1);
        let lon = g.slice_cols(fwd.longitudinal, mode % 2, mode % 2 + 1);
        g.add(lat, lon)
    }

    pub fn decode<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, fwd: &SceneForward, modes: &[usize]) -> Vec<GaussianVars> {
        let contexts = self.predictor.mode_contexts(g, p, fwd.context.context, modes);
        self.predictor.decode(g, p, &contexts, fwd.pooled, modes, fwd.prior)
    }

    /// Maneuver probabilities read off a forward pass.
    pub fn probs<T: Scalar>(&self, g: &Graph<T>, fwd: &SceneForward) -> ManeuverProbs<T> {
        let lat = g.value(fwd.lateral);
        let lon = g.value(fwd.longitudinal);
        ManeuverProbs::from_marginals([lat[[0, 0]].exp(), lat[[0, 1]].exp(), lat[[0, 2]].exp()], [
            lon[[0, 0]].exp(),
            lon[[0, 1]].exp(),
        ])
    }

    /// Negative log-likelihood of the scene's future under its labelled mode.
    pub fn nll<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, scene: &SceneInput<T>) -> Result<Var> {
        let future = scene
            .future
            .as_ref()
            .ok_or_else(|| Error::Contract("scene has no ground-truth future".into()))?;
        let fwd = self.forward(g, p, scene)?;
        let gv = self.decode(g, p, &fwd, &[scene.mode])[0];
        let lp = self.mode_log_prob(g, &fwd, scene.mode);
        let truth = g.constant(to_matrix(future));
        Ok(nll_graph(g, gv, truth, lp))
    }

    /// Full six-mode distribution for one scene.
    pub fn distribution<T: Scalar>(&self, params: &ParamSet<T>, scene: &SceneInput<T>) -> Result<MultimodalDistribution<T>> {
        let mut g = Graph::new();
        let p = params.bind(&mut g, false);
        let fwd = self.forward(&mut g, &p, scene)?;
        let modes: Vec<usize> = (0..NUM_MODES).collect();
        let decoded = self.decode(&mut g, &p, &fwd, &modes);
        let modes = decoded
            .iter()
            .map(|gv| gaussian_from_graph(&g, *gv))
            .collect::<Result<Vec<_>>>()?;
        Ok(MultimodalDistribution {
            modes,
            probs: self.probs(&g, &fwd),
        })
    }
}

/// Reads decoded parameters off the graph, rejecting non-finite steps.
pub fn gaussian_from_graph<T: Scalar>(g: &Graph<T>, gv: GaussianVars) -> Result<BivariateGaussian<T>> {
    let mu = g.value(gv.mu);
    let sigma = g.value(gv.sigma);
    let rho = g.value(gv.rho);
    let tf = mu.nrows();
    for t in 0..tf {
        let vals = [mu[[t, 0]], mu[[t, 1]], sigma[[t, 0]], sigma[[t, 1]], rho[[t, 0]]];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                step: t,
                message: "decoder produced a non-finite value".into(),
            });
        }
    }
    let pt = |m: &Array2<T>, t: usize| -> Point<T> { [m[[t, 0]], m[[t, 1]]] };
    Ok(BivariateGaussian {
        mu: (0..tf).map(|t| pt(mu, t)).collect(),
        sigma: (0..tf).map(|t| pt(sigma, t)).collect(),
        rho: (0..tf).map(|t| rho[[t, 0]]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::grid::GridCell;
    use crate::data::Neighbor;

    pub(crate) fn tiny_cfg() -> InteractionConfig {
        InteractionConfig {
            history: 6,
            future: 4,
            hidden: 8,
            embed: 6,
            heads: 2,
            context: 10,
            decoder_hidden: 7,
            ..InteractionConfig::default()
        }
    }

    fn window(cfg: &InteractionConfig, neighbors: usize) -> SceneWindow {
        let hist = |off: f64| -> Vec<[f64; 2]> {
            (0..cfg.history)
                .map(|t| [off, (t as f64 - (cfg.history - 1) as f64) * 2.5 + off])
                .collect()
        };
        SceneWindow {
            target_history: hist(0.0),
            target_future: (1..=cfg.future).map(|t| [0.1 * t as f64, 2.5 * t as f64]).collect(),
            neighbors: (0..neighbors)
                .map(|i| Neighbor {
                    agent_id: i as i64 + 2,
                    cell: GridCell { row: 2 + i, col: 1 },
                    history: hist(3.7 + i as f64),
                })
                .collect(),
            ..SceneWindow::default()
        }
    }

    #[test]
    fn indivisible_heads_is_a_config_error() {
        let cfg = InteractionConfig { heads: 3, ..tiny_cfg() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(InteractionModel::init::<f64>(cfg, 0).is_err());
    }

    #[test]
    fn wrong_history_length_is_a_contract_violation() {
        let cfg = tiny_cfg();
        let (m, ps) = InteractionModel::init::<f64>(cfg, 0).unwrap();
        let mut w = window(&cfg, 1);
        w.target_history.pop();
        let scene = SceneInput::from_window(&w);
        assert!(matches!(m.distribution(&ps, &scene), Err(Error::Contract(_))));
    }

    #[test]
    fn distribution_respects_type_invariants() {
        let cfg = tiny_cfg();
        for use_pooling in [true, false] {
            for use_reweighting in [true, false] {
                let cfg = InteractionConfig {
                    use_pooling,
                    use_reweighting,
                    ..cfg
                };
                let (m, ps) = InteractionModel::init::<f64>(cfg, 1).unwrap();
                for n in [0, 3] {
                    let d = m.distribution(&ps, &SceneInput::from_window(&window(&cfg, n))).unwrap();
                    assert_eq!(d.modes.len(), NUM_MODES);
                    assert!((d.probs.joint.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    for g in &d.modes {
                        assert_eq!(g.len(), cfg.future);
                        assert!(g.sigma.iter().flatten().all(|&s| s > 0.0));
                        assert!(g.rho.iter().all(|r| r.abs() < 1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn single_precision_runs() {
        let cfg = tiny_cfg();
        let (m, ps) = InteractionModel::init::<f32>(cfg, 2).unwrap();
        let d = m.distribution(&ps, &SceneInput::from_window(&window(&cfg, 2))).unwrap();
        assert!((d.probs.joint.iter().sum::<f32>() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn nll_needs_a_future() {
        let cfg = tiny_cfg();
        let (m, ps) = InteractionModel::init::<f64>(cfg, 0).unwrap();
        let mut scene = SceneInput::from_window(&window(&cfg, 0));
        let mut g = Graph::new();
        let p = ps.bind(&mut g, true);
        let l = m.nll(&mut g, &p, &scene).unwrap();
        assert!(g.scalar(l).is_finite());
        scene.future = None;
        assert!(m.nll(&mut g, &p, &scene).is_err());
    }
}
