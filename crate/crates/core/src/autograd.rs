//! Reverse-mode automatic differentiation over dense row-major matrices.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its value and
//! the indices of its inputs. [`Graph::backward`] walks the tape once in
//! reverse. Nodes built only from constants never receive a gradient, which is
//! how frozen parameter blocks are expressed.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use crate::scalar::Scalar;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Tanh(Var),
    Sigmoid(Var),
    Silu(Var),
    LeakyRelu(Var, T),
    Exp(Var),
    Log(Var),
    Sin(Var),
    Cos(Var),
    Sqrt(Var),
    Square(Var),
    MaxScalar(Var, T),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    SelectRows(Var, Vec<usize>),
    SelectCols(Var, Vec<usize>),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Transpose(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    LayerNormRows(Var, T),
    SumAll(Var),
    MeanRows(Var),
    RowNorms(Var),
    MinAll(Var, usize),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Array2<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Computation tape.
#[derive(Debug, Clone, Default)]
pub struct Graph<T: Scalar> {
    nodes: Vec<Node<T>>,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Array2<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Array2<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros of the given shape when nothing flowed into it.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Array2<T> {
        self.get(v).cloned().unwrap_or_else(|| Array2::zeros(shape))
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> T {
        let val = &self.nodes[v.0].value;
        assert_eq!(val.dim(), (1, 1), "scalar() on a non 1x1 node");
        val[[0, 0]]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    fn unary(&mut self, a: Var, value: Array2<T>, op: Op<T>) -> Var {
        let rg = self.rg(a);
        self.push(value, op, rg)
    }

    fn binary(&mut self, a: Var, b: Var, value: Array2<T>, op: Op<T>) -> Var {
        let rg = self.rg(a) || self.rg(b);
        self.push(value, op, rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.binary(a, b, v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let v = self.value(a) + self.value(b);
        self.binary(a, b, v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "sub shape mismatch");
        let v = self.value(a) - self.value(b);
        self.binary(a, b, v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let v = self.value(a) * self.value(b);
        self.binary(a, b, v, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "div shape mismatch");
        let v = self.value(a) / self.value(b);
        self.binary(a, b, v, Op::Div(a, b))
    }

    /// `a + row`, broadcasting a 1×c row over every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.shape(row).0, 1, "add_row expects a single row");
        assert_eq!(self.shape(a).1, self.shape(row).1, "add_row width mismatch");
        let v = self.value(a) + self.value(row);
        self.binary(a, row, v, Op::AddRow(a, row))
    }

    /// `a ⊙ row`, broadcasting a 1×c row over every row of `a`.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.shape(row).0, 1, "mul_row expects a single row");
        assert_eq!(self.shape(a).1, self.shape(row).1, "mul_row width mismatch");
        let v = self.value(a) * self.value(row);
        self.binary(a, row, v, Op::MulRow(a, row))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let v = self.value(a).mapv(|x| x * c);
        self.unary(a, v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: T) -> Var {
        let v = self.value(a).mapv(|x| x + c);
        self.unary(a, v, Op::AddScalar(a))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -T::one())
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.tanh());
        self.unary(a, v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        self.unary(a, v, Op::Sigmoid(a))
    }

    /// `x · sigmoid(x)`.
    pub fn silu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * sigmoid(x));
        self.unary(a, v, Op::Silu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Var {
        let v = self
            .value(a)
            .mapv(|x| if x > T::zero() { x } else { x * slope });
        self.unary(a, v, Op::LeakyRelu(a, slope))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.exp());
        self.unary(a, v, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.ln());
        self.unary(a, v, Op::Log(a))
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.sin());
        self.unary(a, v, Op::Sin(a))
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.cos());
        self.unary(a, v, Op::Cos(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.sqrt());
        self.unary(a, v, Op::Sqrt(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * x);
        self.unary(a, v, Op::Square(a))
    }

    /// Elementwise `max(x, floor)`; the gradient is zero where the floor is active.
    pub fn max_scalar(&mut self, a: Var, floor: T) -> Var {
        let v = self.value(a).mapv(|x| if x > floor { x } else { floor });
        self.unary(a, v, Op::MaxScalar(a, floor))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        self.unary(a, v, Op::SliceCols(a, start))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![start..end, ..]).to_owned();
        self.unary(a, v, Op::SliceRows(a, start))
    }

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Var {
        let v = self.value(a).select(Axis(0), rows);
        self.unary(a, v, Op::SelectRows(a, rows.to_vec()))
    }

    pub fn select_cols(&mut self, a: Var, cols: &[usize]) -> Var {
        let v = self.value(a).select(Axis(1), cols);
        self.unary(a, v, Op::SelectCols(a, cols.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let views: Vec<ArrayView2<T>> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(1), &views).expect("concat_cols row mismatch");
        let rg = parts.iter().any(|p| self.rg(*p));
        self.push(v, Op::ConcatCols(parts.to_vec()), rg)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let views: Vec<ArrayView2<T>> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(0), &views).expect("concat_rows width mismatch");
        let rg = parts.iter().any(|p| self.rg(*p));
        self.push(v, Op::ConcatRows(parts.to_vec()), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.unary(a, v, Op::Transpose(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a));
        self.unary(a, v, Op::SoftmaxRows(a))
    }

    /// Softmax down each column.
    pub fn softmax_cols(&mut self, a: Var) -> Var {
        let t = self.transpose(a);
        let sm = self.softmax_rows(t);
        self.transpose(sm)
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut v = x.clone();
        for mut row in v.rows_mut() {
            let m = row.fold(T::neg_infinity(), |m, &x| m.max(x));
            let lse = m + row.iter().map(|&x| (x - m).exp()).sum::<T>().ln();
            row.mapv_inplace(|x| x - lse);
        }
        self.unary(a, v, Op::LogSoftmaxRows(a))
    }

    /// Per-row standardisation `(x - mean) / sqrt(var + eps)`, no affine part.
    pub fn layer_norm_rows(&mut self, a: Var, eps: T) -> Var {
        let x = self.value(a);
        let mut v = x.clone();
        for mut row in v.rows_mut() {
            let (mean, inv) = row_moments(row.view(), eps);
            row.mapv_inplace(|x| (x - mean) * inv);
        }
        self.unary(a, v, Op::LayerNormRows(a, eps))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.unary(a, Array2::from_elem((1, 1), s), Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        let s = self.sum_all(a);
        self.scale(s, T::one() / T::from_usize(n).expect("usize fits scalar"))
    }

    /// Mean over rows, producing a 1×c row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let v = self
            .value(a)
            .mean_axis(Axis(0))
            .expect("mean of empty matrix")
            .insert_axis(Axis(0));
        self.unary(a, v, Op::MeanRows(a))
    }

    /// Euclidean norm of each row, producing an n×1 column.
    pub fn row_norms(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut v = Array2::zeros((x.nrows(), 1));
        for (i, row) in x.rows().into_iter().enumerate() {
            v[[i, 0]] = row.iter().map(|&x| x * x).sum::<T>().sqrt();
        }
        self.unary(a, v, Op::RowNorms(a))
    }

    /// Minimum entry as a 1×1 node; ties resolve to the first entry in row-major order.
    pub fn min_all(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut best = 0;
        let mut best_val = T::infinity();
        for (i, &val) in x.iter().enumerate() {
            if val < best_val {
                best_val = val;
                best = i;
            }
        }
        self.unary(a, Array2::from_elem((1, 1), best_val), Op::MinAll(a, best))
    }

    /// Affine map `x · w + b` with `b` a 1×out row.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    /// Back-propagates from a 1×1 output.
    pub fn backward(&self, output: Var) -> Gradients<T> {
        assert_eq!(self.shape(output), (1, 1), "backward needs a scalar output");
        let n = output.0 + 1;
        let mut grads: Vec<Option<Array2<T>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Array2::from_elem((1, 1), T::one()));
        for i in (0..n).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(dy) = grads[i].take() else { continue };
            self.propagate(i, &dy, &mut grads);
            grads[i] = Some(dy);
        }
        Gradients { grads }
    }

    fn acc(&self, grads: &mut [Option<Array2<T>>], v: Var, g: Array2<T>) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => *existing += &g,
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, i: usize, dy: &Array2<T>, grads: &mut [Option<Array2<T>>]) {
        let node = &self.nodes[i];
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    let g = dy.dot(&self.value(*b).t());
                    self.acc(grads, *a, g);
                }
                if self.rg(*b) {
                    let g = self.value(*a).t().dot(dy);
                    self.acc(grads, *b, g);
                }
            }
            Op::Add(a, b) => {
                self.acc(grads, *a, dy.clone());
                self.acc(grads, *b, dy.clone());
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, dy.clone());
                self.acc(grads, *b, dy.mapv(|x| -x));
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    self.acc(grads, *a, dy * self.value(*b));
                }
                if self.rg(*b) {
                    self.acc(grads, *b, dy * self.value(*a));
                }
            }
            Op::Div(a, b) => {
                let bv = self.value(*b);
                if self.rg(*a) {
                    self.acc(grads, *a, dy / bv);
                }
                if self.rg(*b) {
                    // d(a/b)/db = -y / b
                    let g = dy * y / bv;
                    self.acc(grads, *b, g.mapv(|x| -x));
                }
            }
            Op::AddRow(a, r) => {
                self.acc(grads, *a, dy.clone());
                if self.rg(*r) {
                    self.acc(grads, *r, dy.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::MulRow(a, r) => {
                if self.rg(*a) {
                    self.acc(grads, *a, dy * self.value(*r));
                }
                if self.rg(*r) {
                    let g = (dy * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0));
                    self.acc(grads, *r, g);
                }
            }
            Op::Scale(a, c) => {
                let c = *c;
                self.acc(grads, *a, dy.mapv(|x| x * c));
            }
            Op::AddScalar(a) => self.acc(grads, *a, dy.clone()),
            Op::Tanh(a) => {
                let mut g = dy.clone();
                g.zip_mut_with(y, |g, &y| *g *= T::one() - y * y);
                self.acc(grads, *a, g);
            }
            Op::Sigmoid(a) => {
                let mut g = dy.clone();
                g.zip_mut_with(y, |g, &y| *g = *g * y * (T::one() - y));
                self.acc(grads, *a, g);
            }
            Op::Silu(a) => {
                let mut g = dy.clone();
                g.zip_mut_with(self.value(*a), |g, &x| {
                    let s = sigmoid(x);
                    *g *= s + x * s * (T::one() - s);
                });
                self.acc(grads, *a, g);
            }
            Op::LeakyRelu(a, slope) => {
                let slope = *slope;
                let mut g = dy.clone();
                g.zip_mut_with(self.value(*a), |g, &x| {
                    if x <= T::zero() {
                        *g *= slope;
                    }
                });
                self.acc(grads, *a, g);
            }
            Op::Exp(a) => self.acc(grads, *a, dy * y),
            Op::Log(a) => self.acc(grads, *a, dy / self.value(*a)),
            Op::Sin(a) => {
                let mut g = dy.clone();
                g.zip_mut_with(self.value(*a), |g, &x| *g *= x.cos());
                self.acc(grads, *a, g);
            }
            Op::Cos(a) => {
                let mut g = dy.clone();
                g.zip_mut_with(self.value(*a), |g, &x| *g = -*g * x.sin());
                self.acc(grads, *a, g);
            }
            Op::Sqrt(a) => {
                let half = T::lit(0.5);
                let mut g = dy.clone();
                g.zip_mut_with(y, |g, &y| {
                    *g = if y > T::zero() { *g * half / y } else { T::zero() };
                });
                self.acc(grads, *a, g);
            }
            Op::Square(a) => {
                let two = T::lit(2.0);
                let mut g = dy.clone();
                g.zip_mut_with(self.value(*a), |g, &x| *g = *g * two * x);
                self.acc(grads, *a, g);
            }
            Op::MaxScalar(a, floor) => {
                let floor = *floor;
                let mut g = dy.clone();
                g.zip_mut_with(self.value(*a), |g, &x| {
                    if x <= floor {
                        *g = T::zero();
                    }
                });
                self.acc(grads, *a, g);
            }
            Op::SliceCols(a, start) => {
                if self.rg(*a) {
                    let mut g = Array2::zeros(self.shape(*a));
                    let w = dy.ncols();
                    g.slice_mut(s![.., *start..*start + w]).assign(dy);
                    self.acc(grads, *a, g);
                }
            }
            Op::SliceRows(a, start) => {
                if self.rg(*a) {
                    let mut g = Array2::zeros(self.shape(*a));
                    let h = dy.nrows();
                    g.slice_mut(s![*start..*start + h, ..]).assign(dy);
                    self.acc(grads, *a, g);
                }
            }
            Op::SelectRows(a, rows) => {
                if self.rg(*a) {
                    let mut g = Array2::zeros(self.shape(*a));
                    for (k, &r) in rows.iter().enumerate() {
                        let mut dst = g.row_mut(r);
                        dst += &dy.row(k);
                    }
                    self.acc(grads, *a, g);
                }
            }
            Op::SelectCols(a, cols) => {
                if self.rg(*a) {
                    let mut g = Array2::zeros(self.shape(*a));
                    for (k, &c) in cols.iter().enumerate() {
                        let mut dst = g.column_mut(c);
                        dst += &dy.column(k);
                    }
                    self.acc(grads, *a, g);
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let w = self.shape(*p).1;
                    if self.rg(*p) {
                        self.acc(grads, *p, dy.slice(s![.., off..off + w]).to_owned());
                    }
                    off += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let h = self.shape(*p).0;
                    if self.rg(*p) {
                        self.acc(grads, *p, dy.slice(s![off..off + h, ..]).to_owned());
                    }
                    off += h;
                }
            }
            Op::Transpose(a) => self.acc(grads, *a, dy.t().to_owned()),
            Op::SoftmaxRows(a) => {
                let mut g = dy.clone();
                for (mut grow, yrow) in g.rows_mut().into_iter().zip(y.rows()) {
                    let dot: T = grow.iter().zip(yrow.iter()).map(|(&d, &y)| d * y).sum();
                    grow.zip_mut_with(&yrow, |d, &y| *d = y * (*d - dot));
                }
                self.acc(grads, *a, g);
            }
            Op::LogSoftmaxRows(a) => {
                let mut g = dy.clone();
                for (mut grow, yrow) in g.rows_mut().into_iter().zip(y.rows()) {
                    let total: T = grow.sum();
                    grow.zip_mut_with(&yrow, |d, &ly| *d -= ly.exp() * total);
                }
                self.acc(grads, *a, g);
            }
            Op::LayerNormRows(a, eps) => {
                let x = self.value(*a);
                let n = T::from_usize(x.ncols()).expect("width fits scalar");
                let mut g = dy.clone();
                for ((mut grow, yrow), xrow) in
                    g.rows_mut().into_iter().zip(y.rows()).zip(x.rows())
                {
                    let (_, inv) = row_moments(xrow, *eps);
                    let mean_d = grow.sum() / n;
                    let mean_dy: T =
                        grow.iter().zip(yrow.iter()).map(|(&d, &y)| d * y).sum::<T>() / n;
                    grow.zip_mut_with(&yrow, |d, &y| *d = inv * (*d - mean_d - y * mean_dy));
                }
                self.acc(grads, *a, g);
            }
            Op::SumAll(a) => {
                let d = dy[[0, 0]];
                self.acc(grads, *a, Array2::from_elem(self.shape(*a), d));
            }
            Op::MeanRows(a) => {
                let (r, c) = self.shape(*a);
                let inv = T::one() / T::from_usize(r).expect("rows fit scalar");
                let mut g = Array2::zeros((r, c));
                for mut row in g.rows_mut() {
                    row.zip_mut_with(&dy.row(0), |g, &d| *g = d * inv);
                }
                self.acc(grads, *a, g);
            }
            Op::RowNorms(a) => {
                let x = self.value(*a);
                let mut g = x.clone();
                for (i, mut row) in g.rows_mut().into_iter().enumerate() {
                    let n = y[[i, 0]];
                    let d = dy[[i, 0]];
                    if n > T::zero() {
                        row.mapv_inplace(|x| d * x / n);
                    } else {
                        row.fill(T::zero());
                    }
                }
                self.acc(grads, *a, g);
            }
            Op::MinAll(a, idx) => {
                let (r, c) = self.shape(*a);
                let mut g = Array2::zeros((r, c));
                g[[idx / c, idx % c]] = dy[[0, 0]];
                self.acc(grads, *a, g);
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn row_moments<T: Scalar>(row: ndarray::ArrayView1<T>, eps: T) -> (T, T) {
    let n = T::from_usize(row.len()).expect("width fits scalar");
    let mean = row.sum() / n;
    let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    (mean, T::one() / (var + eps).sqrt())
}

/// Numerically stable row softmax on a plain matrix.
pub fn softmax_rows<T: Scalar>(x: &Array2<T>) -> Array2<T> {
    let mut v = x.clone();
    for mut row in v.rows_mut() {
        let m = row.fold(T::neg_infinity(), |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - m).exp());
        let s = row.sum();
        row.mapv_inplace(|x| x / s);
    }
    v
}
