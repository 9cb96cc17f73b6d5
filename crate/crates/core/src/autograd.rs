//! Reverse-mode differentiation over 2-D matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Parameters are
//! read in place from a borrowed [`ParamStore`]; [`Tape::backward`] returns
//! the gradient of a scalar node with respect to every recorded node.

use std::collections::HashMap;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis, Zip};

use crate::params::{GradStore, Matrix, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Input,
    Param(ParamId),
    Embed { table: ParamId, rows: Vec<usize> },
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Affine(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    SoftmaxRows(Var),
    CumsumRows(Var),
    RepeatCols(Var, usize),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize, usize),
    SliceRows(Var, usize, usize),
    Unfold { x: Var, width: usize, left: usize },
    LayerNorm { x: Var, inv_std: Array1<f64> },
    Sum(Var),
    SoftmaxXent { logits: Var, targets: Vec<usize>, probs: Matrix },
}

struct Node {
    op: Op,
    value: Option<Matrix>,
}

pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

/// Gradients of one scalar with respect to every node of a tape.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(acc) => *acc += &g,
        slot @ None => *slot = Some(g),
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: ArrayView2<f64>) -> Matrix {
    let mut out = x.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Tape {
            store,
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    fn push(&mut self, op: Op, value: Matrix) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> ArrayView2<'_, f64> {
        match (&self.nodes[v.0].op, &self.nodes[v.0].value) {
            (_, Some(m)) => m.view(),
            (Op::Param(id), None) => self.store.get(*id).view(),
            _ => unreachable!("node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A leaf whose gradient is reported but never applied anywhere.
    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(Op::Input, value)
    }

    /// The parameter as a node; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(id, v);
        v
    }

    /// Gathers rows of an embedding table.
    pub fn embed(&mut self, table: ParamId, rows: Vec<usize>) -> Var {
        let weights = self.store.get(table);
        let mut out = Array2::zeros((rows.len(), weights.ncols()));
        for (i, &r) in rows.iter().enumerate() {
            out.row_mut(i).assign(&weights.row(r));
        }
        self.push(Op::Embed { table, rows }, out)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b));
        self.push(Op::MatMul(a, b), v)
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b).t());
        self.push(Op::MatMulT(a, b), v)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = &self.value(a) + &self.value(b);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = &self.value(a) - &self.value(b);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = &self.value(a) * &self.value(b);
        self.push(Op::Mul(a, b), v)
    }

    /// Adds a `1 × m` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let v = &self.value(a) + &self.value(row);
        self.push(Op::AddRow(a, row), v)
    }

    /// Multiplies every row of `a` elementwise by a `1 × m` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let v = &self.value(a) * &self.value(row);
        self.push(Op::MulRow(a, row), v)
    }

    /// `scale * a + shift`
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let v = self.value(a).mapv(|x| scale * x + shift);
        self.push(Op::Affine(a, scale), v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        self.push(Op::Sigmoid(a), v)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(Op::Relu(a), v)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a));
        self.push(Op::SoftmaxRows(a), v)
    }

    pub fn cumsum_rows(&mut self, a: Var) -> Var {
        let mut v = self.value(a).to_owned();
        v.accumulate_axis_inplace(Axis(1), |&prev, cur| *cur += prev);
        self.push(Op::CumsumRows(a), v)
    }

    /// Repeats each column `times` times in place: `[a, b] -> [a, a, b, b]`.
    pub fn repeat_cols(&mut self, a: Var, times: usize) -> Var {
        let x = self.value(a);
        let v = Array2::from_shape_fn((x.nrows(), x.ncols() * times), |(i, j)| x[[i, j / times]]);
        self.push(Op::RepeatCols(a, times), v)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
        let v = concatenate(Axis(1), &views).expect("concat_cols: row counts differ");
        self.push(Op::ConcatCols(parts.to_vec()), v)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
        let v = concatenate(Axis(0), &views).expect("concat_rows: column counts differ");
        self.push(Op::ConcatRows(parts.to_vec()), v)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        self.push(Op::SliceCols(a, start, end), v)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![start..end, ..]).to_owned();
        self.push(Op::SliceRows(a, start, end), v)
    }

    /// Sliding windows over rows with zero padding: row `i` of the result is
    /// the concatenation of input rows `i - left .. i - left + width`.
    pub fn unfold(&mut self, x: Var, width: usize, left: usize) -> Var {
        let xv = self.value(x);
        let (n, d) = xv.dim();
        let mut v = Array2::zeros((n, width * d));
        for i in 0..n {
            for k in 0..width {
                let src = i + k;
                if src >= left && src - left < n {
                    v.slice_mut(s![i, k * d..(k + 1) * d])
                        .assign(&xv.row(src - left));
                }
            }
        }
        self.push(Op::Unfold { x, width, left }, v)
    }

    /// Row-wise standardization `(x - mean) / sqrt(var + eps)`.
    pub fn layer_norm(&mut self, x: Var, eps: f64) -> Var {
        let xv = self.value(x);
        let mut v = xv.to_owned();
        let mut inv_std = Array1::zeros(xv.nrows());
        for (i, mut row) in v.rows_mut().into_iter().enumerate() {
            let mean = row.mean().unwrap_or(0.0);
            let var = row.mapv(|a| (a - mean).powi(2)).mean().unwrap_or(0.0);
            let inv = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|a| (a - mean) * inv);
            inv_std[i] = inv;
        }
        self.push(Op::LayerNorm { x, inv_std }, v)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(Op::Sum(a), v)
    }

    /// Summed token cross-entropy `-Σ log softmax(logits)[i, targets[i]]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let probs = softmax_rows(self.value(logits));
        let loss: f64 = targets
            .iter()
            .enumerate()
            .map(|(i, &t)| -probs[[i, t]].max(f64::MIN_POSITIVE).ln())
            .sum();
        self.push(
            Op::SoftmaxXent {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            Array2::from_elem((1, 1), loss),
        )
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    pub fn backward(&self, root: Var) -> Gradients {
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        let (r, c) = self.shape(root);
        grads[root.0] = Some(Array2::ones((r, c)));

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input | Op::Param(_) | Op::Embed { .. } => {}
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    let ga = g.dot(&self.value(*b));
                    let gb = g.t().dot(&self.value(*a));
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, -&g);
                    accumulate(&mut grads, *a, g.clone());
                }
                Op::Mul(a, b) => {
                    let ga = &g * &self.value(*b);
                    let gb = &g * &self.value(*a);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddRow(a, row) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, *row, gr);
                    accumulate(&mut grads, *a, g.clone());
                }
                Op::MulRow(a, row) => {
                    let gr = (&g * &self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let ga = &g * &self.value(*row);
                    accumulate(&mut grads, *row, gr);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Affine(a, scale) => accumulate(&mut grads, *a, &g * *scale),
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().unwrap();
                    let mut ga = g.clone();
                    Zip::from(&mut ga).and(y).for_each(|g, &y| *g *= y * (1.0 - y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let y = node.value.as_ref().unwrap();
                    let mut ga = g.clone();
                    Zip::from(&mut ga).and(y).for_each(|g, &y| *g *= 1.0 - y * y);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Relu(a) => {
                    let mut ga = g.clone();
                    Zip::from(&mut ga)
                        .and(self.value(*a))
                        .for_each(|g, &x| {
                            if x <= 0.0 {
                                *g = 0.0
                            }
                        });
                    accumulate(&mut grads, *a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let y = node.value.as_ref().unwrap();
                    let mut ga = Array2::zeros(y.dim());
                    for ((mut out, gr), yr) in ga.rows_mut().into_iter().zip(g.rows()).zip(y.rows()) {
                        let dot = gr.dot(&yr);
                        Zip::from(&mut out)
                            .and(gr)
                            .and(yr)
                            .for_each(|o, &gi, &yi| *o = yi * (gi - dot));
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::CumsumRows(a) => {
                    let mut ga = g.clone();
                    for mut row in ga.rows_mut() {
                        let m = row.len();
                        for j in (0..m.saturating_sub(1)).rev() {
                            row[j] += row[j + 1];
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::RepeatCols(a, times) => {
                    let (n, m) = self.shape(*a);
                    let mut ga = Array2::zeros((n, m));
                    for ((i, j), &gv) in g.indexed_iter() {
                        ga[[i, j / times]] += gv;
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = self.shape(p).1;
                        accumulate(&mut grads, p, g.slice(s![.., off..off + w]).to_owned());
                        off += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let h = self.shape(p).0;
                        accumulate(&mut grads, p, g.slice(s![off..off + h, ..]).to_owned());
                        off += h;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let mut ga = Array2::zeros(self.shape(*a));
                    ga.slice_mut(s![.., *start..*end]).assign(&g);
                    accumulate(&mut grads, *a, ga);
                }
                Op::SliceRows(a, start, end) => {
                    let mut ga = Array2::zeros(self.shape(*a));
                    ga.slice_mut(s![*start..*end, ..]).assign(&g);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Unfold { x, width, left } => {
                    let (n, d) = self.shape(*x);
                    let mut gx = Array2::zeros((n, d));
                    for i in 0..n {
                        for k in 0..*width {
                            let src = i + k;
                            if src >= *left && src - left < n {
                                let mut row = gx.row_mut(src - left);
                                row += &g.slice(s![i, k * d..(k + 1) * d]);
                            }
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::LayerNorm { x, inv_std } => {
                    let y = node.value.as_ref().unwrap();
                    let m = y.ncols() as f64;
                    let mut gx = Array2::zeros(y.dim());
                    for (i, ((mut out, gr), yr)) in
                        gx.rows_mut().into_iter().zip(g.rows()).zip(y.rows()).enumerate()
                    {
                        let mean_g = gr.sum() / m;
                        let mean_gy = gr.dot(&yr) / m;
                        Zip::from(&mut out)
                            .and(gr)
                            .and(yr)
                            .for_each(|o, &gi, &yi| *o = inv_std[i] * (gi - mean_g - yi * mean_gy));
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Sum(a) => {
                    let ga = Array2::from_elem(self.shape(*a), g[[0, 0]]);
                    accumulate(&mut grads, *a, ga);
                }
                Op::SoftmaxXent {
                    logits,
                    targets,
                    probs,
                } => {
                    let mut ga = probs.clone();
                    for (i, &t) in targets.iter().enumerate() {
                        ga[[i, t]] -= 1.0;
                    }
                    ga *= g[[0, 0]];
                    accumulate(&mut grads, *logits, ga);
                }
            }
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    /// Adds this tape's parameter gradients into `out`.
    pub fn accumulate_params(&self, grads: &Gradients, out: &mut GradStore) {
        for (node, g) in self.nodes.iter().zip(&grads.grads) {
            let Some(g) = g else { continue };
            match &node.op {
                Op::Param(id) => {
                    if self.store.param(*id).trainable {
                        *out.slot(*id, g.dim()) += g;
                    }
                }
                Op::Embed { table, rows }
                    if self.store.param(*table).trainable => {
                        let slot = out.slot(*table, self.store.get(*table).dim());
                        for (i, &r) in rows.iter().enumerate() {
                            let mut dst = slot.row_mut(r);
                            dst += &g.row(i);
                        }
                    }
                _ => {}
            }
        }
    }
}
