//! Motion encoding, wave-superposition social pooling and temporal
//! self-attention: everything that turns a scene into the interaction
//! context `C`.

mod superposition;

pub use superposition::{superpose_waves, surrounding_fc, AgentWave};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Var};
use crate::data::grid::{GRID_CELLS, CENTER_CELL};
use crate::nn::{multi_head_self_attention, Bound, LayerNorm, Linear, Lstm, ParamId, ParamSet};
use crate::scalar::Scalar;

/// Which motion encoder a history goes through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stream {
    Target,
    Neighbor,
}

/// Layer sizes of the interaction stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveConfig {
    /// Width `d` of hidden states, waves and social features.
    pub hidden: usize,
    /// Width of the per-timestep input embedding.
    pub embed: usize,
    pub heads: usize,
    /// Width `d_c` of the fused interaction context.
    pub context: usize,
    /// Pool neighbors through wave superposition; when off the social
    /// sequence is the target's own hidden states.
    pub use_pooling: bool,
}

impl Default for WaveConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            embed: 32,
            heads: 4,
            context: 64,
            use_pooling: true,
        }
    }
}

/// Graph handles for one scene's interaction context.
#[derive(Debug, Clone)]
pub struct ContextVars {
    /// Target hidden states, `T_h × d`.
    pub enc_tar: Var,
    /// Per-timestep pooled social features, `T_h × d`.
    pub social: Var,
    /// Attention-refined social features, `T_h × d`.
    pub social_refined: Var,
    /// Attention score matrix of every head, `T_h × T_h`.
    pub scores: Vec<Var>,
    /// Fused context, `T_h × d_c`.
    pub context: Var,
}

/// Learnable layers of the interaction encoder. All ids index one shared
/// [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveInteraction {
    pub cfg: WaveConfig,
    pub target_embed: Linear,
    pub target_lstm: Lstm,
    pub neighbor_embed: Linear,
    pub neighbor_lstm: Lstm,
    pub amplitude: Linear,
    pub phase: Linear,
    /// `W^t`, cells × cells.
    pub mix_real: ParamId,
    /// `W^i`, cells × cells.
    pub mix_imag: ParamId,
    pub mix_bias: ParamId,
    pub query: ParamId,
    pub key: ParamId,
    pub value: ParamId,
    pub norm: LayerNorm,
    pub fuse: Linear,
}

const EMBED_SLOPE: f64 = 0.1;

impl WaveInteraction {
    pub fn new<T: Scalar, R: Rng>(ps: &mut ParamSet<T>, cfg: WaveConfig, rng: &mut R) -> Self {
        let d = cfg.hidden;
        let mix_scale = 1.0 / (GRID_CELLS as f64).sqrt();
        let mix = |name: &str, ps: &mut ParamSet<T>, rng: &mut R| {
            let id = ps.add_glorot(name, GRID_CELLS, GRID_CELLS, rng);
            // the target's own wave starts as the dominant term
            let m = ps.get_mut(id);
            m.mapv_inplace(|x| x * T::lit(mix_scale));
            for i in 0..GRID_CELLS {
                m[[i, i]] = T::one();
            }
            id
        };
        let mix_real = mix("wave.mix_real", ps, rng);
        let mix_imag = mix("wave.mix_imag", ps, rng);
        Self {
            cfg,
            target_embed: Linear::new(ps, "enc_tar.embed", 2, cfg.embed, rng),
            target_lstm: Lstm::new(ps, "enc_tar.lstm", cfg.embed, d, rng),
            neighbor_embed: Linear::new(ps, "enc_nbr.embed", 2, cfg.embed, rng),
            neighbor_lstm: Lstm::new(ps, "enc_nbr.lstm", cfg.embed, d, rng),
            amplitude: Linear::new(ps, "wave.amplitude", d, d, rng),
            phase: Linear::new(ps, "wave.phase", d, d, rng),
            mix_real,
            mix_imag,
            mix_bias: ps.add_filled("wave.mix_bias", 1, d, 0.0),
            query: ps.add_glorot("attn.query", d, d, rng),
            key: ps.add_glorot("attn.key", d, d, rng),
            value: ps.add_glorot("attn.value", d, d, rng),
            norm: LayerNorm::new(ps, "attn.norm", d),
            fuse: Linear::new(ps, "fuse", 2 * d, cfg.context, rng),
        }
    }

    /// Embeds each timestep, runs the stream's LSTM from a zero state and
    /// returns every hidden state (`rows × d` per step).
    pub fn encode_motion<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, steps: &[Var], stream: Stream) -> Vec<Var> {
        let (embed, lstm) = match stream {
            Stream::Target => (self.target_embed, self.target_lstm),
            Stream::Neighbor => (self.neighbor_embed, self.neighbor_lstm),
        };
        let rows = g.shape(steps[0]).0;
        let mut state = lstm.zero_state(g, rows);
        steps
            .iter()
            .map(|&x| {
                let e = embed.forward(g, p, x);
                let e = g.leaky_relu(e, T::lit(EMBED_SLOPE));
                state = lstm.step(g, p, e, state);
                state.0
            })
            .collect()
    }

    /// Plain-FC amplitude and phase of each row of `h`.
    pub fn wave_decompose<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, h: Var) -> (Var, Var) {
        let z = self.amplitude.forward(g, p, h);
        let theta = self.phase.forward(g, p, h);
        (z, theta)
    }

    /// Selected `(W^t, W^i)` entries of the target's output row for the
    /// occupied `cells` (target first), each `1 × n`.
    pub fn target_mixing_row<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, cells: &[usize]) -> (Var, Var) {
        let real = g.slice_rows(p[self.mix_real], CENTER_CELL, CENTER_CELL + 1);
        let imag = g.slice_rows(p[self.mix_imag], CENTER_CELL, CENTER_CELL + 1);
        (g.select_cols(real, cells), g.select_cols(imag, cells))
    }

    /// Surrounding-FC output at the target's cell for one timestep.
    ///
    /// `agents` stacks the target row first then one row per occupied cell
    /// in the order of `mix_row`'s columns.
    pub fn pool_step<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, agents: Var, mix_row: (Var, Var)) -> Var {
        let (z, theta) = self.wave_decompose(g, p, agents);
        let cos = g.cos(theta);
        let sin = g.sin(theta);
        let re = g.mul(z, cos);
        let im = g.mul(z, sin);
        let a = g.matmul(mix_row.0, re);
        let b = g.matmul(mix_row.1, im);
        let o = g.add(a, b);
        g.add_row(o, p[self.mix_bias])
    }

    /// Multi-head self-attention over timesteps, heads concatenated then
    /// layer-normalised.
    pub fn temporal_attention<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, social: Var) -> (Var, Vec<Var>) {
        let (heads, scores) =
            multi_head_self_attention(g, social, p[self.query], p[self.key], p[self.value], self.cfg.heads);
        (self.norm.forward(g, p, heads), scores)
    }

    /// Row-wise `[H̃ ‖ enc_tar]` followed by a learned projection to `d_c`.
    pub fn fuse_context<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, refined: Var, enc_tar: Var) -> Var {
        let cat = g.concat_cols(&[refined, enc_tar]);
        self.fuse.forward(g, p, cat)
    }

    /// Full encoder: motion encoding, per-timestep pooling, attention, fusion.
    ///
    /// `target_steps[t]` is `1 × 2`, `neighbor_steps[t]` is `n × 2` for the
    /// neighbors in `cells` order (empty when no neighbors).
    pub fn context<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &Bound,
        target_steps: &[Var],
        neighbor_steps: &[Var],
        cells: &[usize],
    ) -> ContextVars {
        let tar = self.encode_motion(g, p, target_steps, Stream::Target);
        let enc_tar = g.concat_rows(&tar);
        let social = if self.cfg.use_pooling {
            let nbr = if neighbor_steps.is_empty() {
                Vec::new()
            } else {
                self.encode_motion(g, p, neighbor_steps, Stream::Neighbor)
            };
            let mut all_cells = Vec::with_capacity(cells.len() + 1);
            all_cells.push(CENTER_CELL);
            all_cells.extend_from_slice(cells);
            let mix_row = self.target_mixing_row(g, p, &all_cells);
            let rows: Vec<Var> = (0..tar.len())
                .map(|t| {
                    let agents = if nbr.is_empty() { tar[t] } else { g.concat_rows(&[tar[t], nbr[t]]) };
                    self.pool_step(g, p, agents, mix_row)
                })
                .collect();
            g.concat_rows(&rows)
        } else {
            enc_tar
        };
        let (social_refined, scores) = self.temporal_attention(g, p, social);
        let context = self.fuse_context(g, p, social_refined, enc_tar);
        ContextVars {
            enc_tar,
            social,
            social_refined,
            scores,
            context,
        }
    }
}
