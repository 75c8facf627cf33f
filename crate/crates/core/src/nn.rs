//! Parameter storage, the handful of layers the models are built from, and the
//! adaptive-moment optimizer.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Gradients, Graph, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Index of a tensor inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named, ordered collection of learnable matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    names: Vec<String>,
    values: Vec<Array2<T>>,
}

impl<T: Scalar> Default for ParamSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<T>) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// Glorot-uniform initialised `rows × cols` matrix.
    pub fn add_glorot<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> ParamId {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let value = Array2::from_shape_fn((rows, cols), |_| T::lit(rng.gen_range(-limit..limit)));
        self.add(name, value)
    }

    pub fn add_filled(&mut self, name: impl Into<String>, rows: usize, cols: usize, v: f64) -> ParamId {
        self.add(name, Array2::from_elem((rows, cols), T::lit(v)))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalars.
    pub fn size(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn get(&self, id: ParamId) -> &Array2<T> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<T> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<T>)> {
        self.names.iter().map(String::as_str).zip(self.values.iter())
    }

    pub fn values(&self) -> &[Array2<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Array2<T>] {
        &mut self.values
    }

    /// Places every tensor on the graph; `trainable = false` freezes the block.
    pub fn bind(&self, g: &mut Graph<T>, trainable: bool) -> Bound {
        let vars = self
            .values
            .iter()
            .map(|v| {
                if trainable {
                    g.param(v.clone())
                } else {
                    g.constant(v.clone())
                }
            })
            .collect();
        Bound { vars }
    }

    /// Collects the gradient of every bound tensor (zeros where none flowed).
    pub fn gradients(&self, bound: &Bound, grads: &Gradients<T>) -> Vec<Array2<T>> {
        self.values
            .iter()
            .zip(&bound.vars)
            .map(|(v, var)| grads.get_or_zeros(*var, v.dim()))
            .collect()
    }

    pub fn to_records(&self) -> Vec<TensorRecord> {
        self.iter()
            .map(|(name, v)| TensorRecord {
                name: name.to_string(),
                rows: v.nrows(),
                cols: v.ncols(),
                data: v.iter().map(|x| x.as_f64()).collect(),
            })
            .collect()
    }

    /// Rebuilds from records, requiring the same names and shapes as `self`.
    pub fn load_records(&mut self, records: &[TensorRecord]) -> Result<()> {
        if records.len() != self.values.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                self.values.len(),
                records.len()
            )));
        }
        for ((name, value), rec) in self.names.iter().zip(self.values.iter_mut()).zip(records) {
            if *name != rec.name || value.dim() != (rec.rows, rec.cols) {
                return Err(Error::Checkpoint(format!(
                    "tensor {} {:?} does not match record {} ({}, {})",
                    name,
                    value.dim(),
                    rec.name,
                    rec.rows,
                    rec.cols
                )));
            }
            if rec.data.len() != rec.rows * rec.cols {
                return Err(Error::Checkpoint(format!("tensor {} has wrong length", rec.name)));
            }
            *value = Array2::from_shape_vec((rec.rows, rec.cols), rec.data.iter().map(|&x| T::lit(x)).collect())
                .expect("shape checked");
        }
        Ok(())
    }
}

/// Serialized tensor: name, shape and row-major `f64` data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Graph handles for one bound [`ParamSet`].
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
}

impl std::ops::Index<ParamId> for Bound {
    type Output = Var;
    fn index(&self, id: ParamId) -> &Var {
        &self.vars[id.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<T: Scalar, R: Rng>(ps: &mut ParamSet<T>, name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        let w = ps.add_glorot(format!("{name}.w"), input, output, rng);
        let b = ps.add_filled(format!("{name}.b"), 1, output, 0.0);
        Self { w, b }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, x: Var) -> Var {
        g.affine(x, p[self.w], p[self.b])
    }
}

/// Single-layer LSTM with gate order (input, forget, cell, output).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lstm {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b: ParamId,
    pub hidden: usize,
}

impl Lstm {
    pub fn new<T: Scalar, R: Rng>(ps: &mut ParamSet<T>, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let w_ih = ps.add_glorot(format!("{name}.w_ih"), input, 4 * hidden, rng);
        let w_hh = ps.add_glorot(format!("{name}.w_hh"), hidden, 4 * hidden, rng);
        let mut bias = Array2::zeros((1, 4 * hidden));
        // forget gate starts open
        for j in hidden..2 * hidden {
            bias[[0, j]] = T::one();
        }
        let b = ps.add(format!("{name}.b"), bias);
        Self { w_ih, w_hh, b, hidden }
    }

    /// Zero state for a batch of `rows` sequences.
    pub fn zero_state<T: Scalar>(&self, g: &mut Graph<T>, rows: usize) -> (Var, Var) {
        let h = g.constant(Array2::zeros((rows, self.hidden)));
        let c = g.constant(Array2::zeros((rows, self.hidden)));
        (h, c)
    }

    pub fn step<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, x: Var, state: (Var, Var)) -> (Var, Var) {
        let (h, c) = state;
        let n = self.hidden;
        let xi = g.matmul(x, p[self.w_ih]);
        let hh = g.matmul(h, p[self.w_hh]);
        let pre = g.add(xi, hh);
        let pre = g.add_row(pre, p[self.b]);
        let i = g.slice_cols(pre, 0, n);
        let f = g.slice_cols(pre, n, 2 * n);
        let cand = g.slice_cols(pre, 2 * n, 3 * n);
        let o = g.slice_cols(pre, 3 * n, 4 * n);
        let i = g.sigmoid(i);
        let f = g.sigmoid(f);
        let cand = g.tanh(cand);
        let o = g.sigmoid(o);
        let keep = g.mul(f, c);
        let write = g.mul(i, cand);
        let c_new = g.add(keep, write);
        let tc = g.tanh(c_new);
        let h_new = g.mul(o, tc);
        (h_new, c_new)
    }
}

/// Row-wise layer normalisation with learned gain and bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl LayerNorm {
    pub fn new<T: Scalar>(ps: &mut ParamSet<T>, name: &str, width: usize) -> Self {
        let gain = ps.add_filled(format!("{name}.gain"), 1, width, 1.0);
        let bias = ps.add_filled(format!("{name}.bias"), 1, width, 0.0);
        Self { gain, bias }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, p: &Bound, x: Var) -> Var {
        let n = g.layer_norm_rows(x, T::lit(LAYER_NORM_EPS));
        let scaled = g.mul_row(n, p[self.gain]);
        g.add_row(scaled, p[self.bias])
    }
}

/// Multi-head scaled dot-product self-attention over the rows of `x`.
///
/// Returns the concatenated head outputs and each head's score matrix.
pub fn multi_head_self_attention<T: Scalar>(
    g: &mut Graph<T>,
    x: Var,
    wq: Var,
    wk: Var,
    wv: Var,
    heads: usize,
) -> (Var, Vec<Var>) {
    let q = g.matmul(x, wq);
    let k = g.matmul(x, wk);
    let v = g.matmul(x, wv);
    let width = g.shape(q).1;
    assert!(heads > 0 && width.is_multiple_of(heads), "width {width} not divisible by {heads} heads");
    let dk = width / heads;
    let inv_sqrt = T::one() / T::lit(dk as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    let mut scores = Vec::with_capacity(heads);
    for hd in 0..heads {
        let qh = g.slice_cols(q, hd * dk, (hd + 1) * dk);
        let kh = g.slice_cols(k, hd * dk, (hd + 1) * dk);
        let vh = g.slice_cols(v, hd * dk, (hd + 1) * dk);
        let kt = g.transpose(kh);
        let raw = g.matmul(qh, kt);
        let raw = g.scale(raw, inv_sqrt);
        let score = g.softmax_rows(raw);
        outs.push(g.matmul(score, vh));
        scores.push(score);
    }
    let out = if heads == 1 { outs[0] } else { g.concat_cols(&outs) };
    (out, scores)
}

/// Sinusoidal embedding of a scalar position (`sin` on even, `cos` on odd slots).
pub fn sinusoidal_embedding(position: f64, width: usize) -> Vec<f64> {
    (0..width)
        .map(|j| {
            let freq = 10000f64.powf(-((j / 2 * 2) as f64) / width as f64);
            if j % 2 == 0 {
                (position * freq).sin()
            } else {
                (position * freq).cos()
            }
        })
        .collect()
}

/// First-order adaptive-moment optimizer state.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ParamSet<T>, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Array2<T>> = params.values().iter().map(|p| Array2::zeros(p.dim())).collect();
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut ParamSet<T>, grads: &[Array2<T>], lr: f64) {
        self.step += 1;
        let b1 = T::lit(self.beta1);
        let b2 = T::lit(self.beta2);
        let c1 = T::lit(1.0 - self.beta1.powi(self.step as i32));
        let c2 = T::lit(1.0 - self.beta2.powi(self.step as i32));
        let lr = T::lit(lr);
        let eps = T::lit(self.eps);
        for (((p, g), m), v) in params
            .values_mut()
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *p -= lr * mh / (vh.sqrt() + eps);
            });
        }
    }
}

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut [Array2<T>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(|g| g.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = T::lit(max_norm / norm);
        for g in grads.iter_mut() {
            g.mapv_inplace(|x| x * s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adam_minimises_a_quadratic() {
        let mut ps = ParamSet::<f64>::new();
        let id = ps.add("x", Array2::from_elem((1, 2), 3.0));
        let mut opt = Adam::new(&ps, 0.9, 0.999, 1e-8);
        for _ in 0..2000 {
            let grad = ps.get(id).mapv(|x| 2.0 * (x - 1.0));
            opt.update(&mut ps, &[grad], 0.01);
        }
        for &x in ps.get(id) {
            assert!((x - 1.0).abs() < 1e-3, "{x}");
        }
    }

    #[test]
    fn clipping_bounds_the_norm() {
        let mut g = vec![Array2::from_elem((2, 2), 3.0f64)];
        let before = clip_global_norm(&mut g, 1.0);
        assert!((before - 6.0).abs() < 1e-12);
        let after: f64 = g[0].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((after - 1.0).abs() < 1e-12);
    }

    #[test]
    fn records_round_trip_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ps = ParamSet::<f32>::new();
        Linear::new(&mut ps, "l", 3, 4, &mut rng);
        let mut other = ps.clone();
        other.values_mut()[0].fill(0.0);
        other.load_records(&ps.to_records()).unwrap();
        assert_eq!(other, ps);
    }

    #[test]
    fn sinusoidal_embedding_differs_across_positions() {
        let a = sinusoidal_embedding(1.0, 32);
        let b = sinusoidal_embedding(2.0, 32);
        assert_eq!(a.len(), 32);
        assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-3));
        assert_eq!(sinusoidal_embedding(0.0, 4), vec![0.0, 1.0, 0.0, 1.0]);
    }
}
