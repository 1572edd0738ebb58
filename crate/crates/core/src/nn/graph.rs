//! Reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its value and
//! the operands it was computed from. [`Graph::backward`] walks the tape in
//! reverse and accumulates gradients for every node that (transitively)
//! depends on a parameter or a gradient-tracked input.
//!
//! Parameters are borrowed from a [`ParamStore`] for the lifetime of the graph,
//! so building a graph never copies weight matrices.

use std::borrow::Cow;
use std::collections::HashMap;

use ndarray::{s, Array2, Axis};

use super::params::{ParamId, ParamStore};

/// Handle to a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `b` may be a single row broadcast over the rows of `a`.
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    ConcatCols(Vec<Var>),
    StackRows(Vec<(Var, usize)>),
    SliceCols(Var, usize, usize),
    Transpose(Var),
    RowScale(Var, Vec<f64>),
    MaskedSoftmax(Var),
    LogSoftmaxAt(Var, Vec<bool>, usize),
    Sum(Var),
    GatherRows(Var, Vec<usize>),
}

struct Node<'a> {
    value: Cow<'a, Array2<f64>>,
    op: Op,
    requires_grad: bool,
}

/// Computation tape.
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
    params: HashMap<ParamId, Var>,
}

/// Gradients produced by [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient of the root with respect to `var`, if any flowed into it.
    pub fn get(&self, var: Var) -> Option<&Array2<f64>> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Array2<f64>>, op: Op, requires_grad: bool) -> Var {
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

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    /// Untracked constant.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(Cow::Owned(value), Op::Leaf, false)
    }

    /// Borrowed leaf; `track` decides whether gradients are accumulated for it.
    pub fn input(&mut self, value: &'a Array2<f64>, track: bool) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf, track)
    }

    /// Leaf bound to a trainable parameter. Repeated calls return the same node.
    pub fn param(&mut self, store: &'a ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(Cow::Borrowed(store.get(id)), Op::Leaf, true);
        self.params.insert(id, v);
        v
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.constant(Array2::zeros((rows, cols)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(Cow::Owned(value), Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let value = if va.dim() == vb.dim() {
            va + vb
        } else {
            assert!(
                vb.nrows() == 1 && vb.ncols() == va.ncols(),
                "add: incompatible shapes {:?} and {:?}",
                va.dim(),
                vb.dim()
            );
            va + &vb.row(0)
        };
        let rg = self.rg(a) || self.rg(b);
        self.push(Cow::Owned(value), Op::Add(a, b), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(Cow::Owned(value), Op::Mul(a, b), rg)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a) * k;
        let rg = self.rg(a);
        self.push(Cow::Owned(value), Op::Scale(a, k), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        let rg = self.rg(a);
        self.push(Cow::Owned(value), Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        let rg = self.rg(a);
        self.push(Cow::Owned(value), Op::Tanh(a), rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols: no operands");
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row mismatch");
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(Cow::Owned(value), Op::ConcatCols(parts.to_vec()), rg)
    }

    /// Builds a matrix whose `k`-th row is row `r` of node `v` for `rows[k] = (v, r)`.
    pub fn stack_rows(&mut self, rows: &[(Var, usize)]) -> Var {
        assert!(!rows.is_empty(), "stack_rows: no rows");
        let cols = self.value(rows[0].0).ncols();
        let mut value = Array2::zeros((rows.len(), cols));
        for (k, &(v, r)) in rows.iter().enumerate() {
            value.row_mut(k).assign(&self.value(v).row(r));
        }
        let rg = rows.iter().any(|&(v, _)| self.rg(v));
        self.push(Cow::Owned(value), Op::StackRows(rows.to_vec()), rg)
    }

    pub fn row(&mut self, v: Var, r: usize) -> Var {
        self.stack_rows(&[(v, r)])
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let value = self.value(a).slice(s![.., start..end]).to_owned();
        let rg = self.rg(a);
        self.push(Cow::Owned(value), Op::SliceCols(a, start, end), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).t().to_owned();
        let rg = self.rg(a);
        self.push(Cow::Owned(value), Op::Transpose(a), rg)
    }

    /// Multiplies row `i` by the constant `factors[i]`.
    pub fn row_scale(&mut self, a: Var, factors: Vec<f64>) -> Var {
        let mut value = self.value(a).clone();
        assert_eq!(value.nrows(), factors.len(), "row_scale: length mismatch");
        for (mut row, &f) in value.rows_mut().into_iter().zip(&factors) {
            row *= f;
        }
        let rg = self.rg(a);
        self.push(Cow::Owned(value), Op::RowScale(a, factors), rg)
    }

    /// Row-wise softmax restricted to columns where `mask` is true. Masked
    /// columns get probability zero; a row with no open column is all zero.
    pub fn masked_softmax(&mut self, a: Var, mask: &[bool]) -> Var {
        let x = self.value(a);
        assert_eq!(x.ncols(), mask.len(), "masked_softmax: mask length");
        let mut value = Array2::zeros(x.dim());
        for (r, row) in x.rows().into_iter().enumerate() {
            let probs = masked_softmax_row(row.iter().copied(), mask);
            value.row_mut(r).assign(&ndarray::Array1::from(probs));
        }
        let rg = self.rg(a);
        self.push(Cow::Owned(value), Op::MaskedSoftmax(a), rg)
    }

    /// Log-probability of column `index` under the masked softmax of a 1×n row.
    pub fn log_softmax_at(&mut self, a: Var, mask: Vec<bool>, index: usize) -> Var {
        let x = self.value(a);
        assert_eq!(x.nrows(), 1, "log_softmax_at: expects a single row");
        assert!(mask[index], "log_softmax_at: index is masked");
        let lse = masked_log_sum_exp(x.row(0).iter().copied(), &mask);
        let value = Array2::from_elem((1, 1), x[[0, index]] - lse);
        let rg = self.rg(a);
        self.push(Cow::Owned(value), Op::LogSoftmaxAt(a, mask, index), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        let rg = self.rg(a);
        self.push(Cow::Owned(value), Op::Sum(a), rg)
    }

    pub fn add_all(&mut self, vars: &[Var]) -> Var {
        let mut it = vars.iter().copied();
        let first = it.next().expect("add_all: no operands");
        it.fold(first, |acc, v| self.add(acc, v))
    }

    /// Row lookup into a table (embedding lookup).
    pub fn gather_rows(&mut self, table: Var, ids: Vec<usize>) -> Var {
        let t = self.value(table);
        let mut value = Array2::zeros((ids.len(), t.ncols()));
        for (k, &id) in ids.iter().enumerate() {
            value.row_mut(k).assign(&t.row(id));
        }
        let rg = self.rg(table);
        self.push(Cow::Owned(value), Op::GatherRows(table, ids), rg)
    }

    /// Reverse sweep from the 1×1 node `root`.
    pub fn backward(&self, root: Var) -> Gradients {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        assert_eq!(self.value(root).dim(), (1, 1), "backward: root must be scalar");
        if !self.rg(root) {
            return Gradients { grads };
        }
        grads[root.0] = Some(Array2::ones((1, 1)));

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            // leaves keep their gradient so callers can read it
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        let ga = g.dot(&self.value(*b).t());
                        self.accumulate(&mut grads, *a, ga);
                    }
                    if self.rg(*b) {
                        let gb = self.value(*a).t().dot(&g);
                        self.accumulate(&mut grads, *b, gb);
                    }
                }
                Op::Add(a, b) => {
                    if self.rg(*b) {
                        let gb = if self.value(*b).dim() == g.dim() {
                            g.clone()
                        } else {
                            g.sum_axis(Axis(0)).insert_axis(Axis(0))
                        };
                        self.accumulate(&mut grads, *b, gb);
                    }
                    if self.rg(*a) {
                        self.accumulate(&mut grads, *a, g.clone());
                    }
                }
                Op::Mul(a, b) => {
                    if self.rg(*a) {
                        let ga = &g * self.value(*b);
                        self.accumulate(&mut grads, *a, ga);
                    }
                    if self.rg(*b) {
                        let gb = &g * self.value(*a);
                        self.accumulate(&mut grads, *b, gb);
                    }
                }
                Op::Scale(a, k) => self.accumulate(&mut grads, *a, g * *k),
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let ga = ndarray::Zip::from(&g)
                        .and(&**y)
                        .map_collect(|&g, &y| g * y * (1.0 - y));
                    self.accumulate(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let ga = ndarray::Zip::from(&g)
                        .and(&**y)
                        .map_collect(|&g, &y| g * (1.0 - y * y));
                    self.accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        if self.rg(p) {
                            let gp = g.slice(s![.., offset..offset + w]).to_owned();
                            self.accumulate(&mut grads, p, gp);
                        }
                        offset += w;
                    }
                }
                Op::StackRows(rows) => {
                    for (k, &(v, r)) in rows.iter().enumerate() {
                        if !self.rg(v) {
                            continue;
                        }
                        let shape = self.value(v).dim();
                        let slot = grads[v.0].get_or_insert_with(|| Array2::zeros(shape));
                        let mut dst = slot.row_mut(r);
                        dst += &g.row(k);
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let shape = self.value(*a).dim();
                    let slot = grads[a.0].get_or_insert_with(|| Array2::zeros(shape));
                    let mut dst = slot.slice_mut(s![.., *start..*end]);
                    dst += &g;
                }
                Op::Transpose(a) => self.accumulate(&mut grads, *a, g.t().to_owned()),
                Op::RowScale(a, factors) => {
                    let mut ga = g;
                    for (mut row, &f) in ga.rows_mut().into_iter().zip(factors) {
                        row *= f;
                    }
                    self.accumulate(&mut grads, *a, ga);
                }
                Op::MaskedSoftmax(a) => {
                    let y = &node.value;
                    let mut ga = Array2::zeros(y.dim());
                    for r in 0..y.nrows() {
                        let dot: f64 = g.row(r).iter().zip(y.row(r)).map(|(g, y)| g * y).sum();
                        for c in 0..y.ncols() {
                            ga[[r, c]] = y[[r, c]] * (g[[r, c]] - dot);
                        }
                    }
                    self.accumulate(&mut grads, *a, ga);
                }
                Op::LogSoftmaxAt(a, mask, index) => {
                    let x = self.value(*a);
                    let probs = masked_softmax_row(x.row(0).iter().copied(), mask);
                    let upstream = g[[0, 0]];
                    let mut ga = Array2::zeros(x.dim());
                    for (c, p) in probs.into_iter().enumerate() {
                        let indicator = if c == *index { 1.0 } else { 0.0 };
                        ga[[0, c]] = upstream * (indicator - p);
                    }
                    self.accumulate(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let shape = self.value(*a).dim();
                    self.accumulate(&mut grads, *a, Array2::from_elem(shape, g[[0, 0]]));
                }
                Op::GatherRows(table, ids) => {
                    let shape = self.value(*table).dim();
                    let slot = grads[table.0].get_or_insert_with(|| Array2::zeros(shape));
                    for (k, &id) in ids.iter().enumerate() {
                        let mut dst = slot.row_mut(id);
                        dst += &g.row(k);
                    }
                }
            }
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => *existing += &g,
            slot @ None => *slot = Some(g),
        }
    }

    /// Gradients of every parameter touched by this graph, keyed by id.
    pub fn param_gradients(&self, grads: &Gradients) -> HashMap<ParamId, Array2<f64>> {
        self.params
            .iter()
            .filter_map(|(&id, &v)| grads.get(v).map(|g| (id, g.clone())))
            .collect()
    }

    /// True when every value on the tape is finite.
    pub fn all_finite(&self, v: Var) -> bool {
        self.value(v).iter().all(|x| x.is_finite())
    }
}

/// Softmax over the open entries of `mask`; closed entries are zero.
pub fn masked_softmax_row(xs: impl Iterator<Item = f64> + Clone, mask: &[bool]) -> Vec<f64> {
    let max = xs
        .clone()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(x, _)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; mask.len()];
    }
    let exps: Vec<f64> = xs
        .zip(mask)
        .map(|(x, &m)| if m { (x - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn masked_log_sum_exp(xs: impl Iterator<Item = f64> + Clone, mask: &[bool]) -> f64 {
    let max = xs
        .clone()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(x, _)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = xs
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(x, _)| (x - max).exp())
        .sum();
    max + total.ln()
}
