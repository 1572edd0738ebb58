//! Recurrent and attention building blocks shared by both agents.

use ndarray::Array2;
use rand::Rng;

use super::graph::{Graph, Var};
use super::params::{ParamId, ParamStore};

/// Affine map `x·W (+ b)`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let w = store.add_uniform(format!("{name}.w"), (input, output), bound, rng);
        let b = bias.then(|| store.add(format!("{name}.b"), Array2::zeros((1, output))));
        Self { w, b }
    }

    pub fn forward<'a>(&self, g: &mut Graph<'a>, store: &'a ParamStore, x: Var) -> Var {
        let w = g.param(store, self.w);
        let y = g.matmul(x, w);
        match self.b {
            Some(b) => {
                let b = g.param(store, b);
                g.add(y, b)
            }
            None => y,
        }
    }
}

/// Single LSTM cell with gate order input, forget, cell, output.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let w_ih = store.add_uniform(format!("{name}.w_ih"), (input, 4 * hidden), bound, rng);
        let w_hh = store.add_uniform(format!("{name}.w_hh"), (hidden, 4 * hidden), bound, rng);
        let mut b = Array2::zeros((1, 4 * hidden));
        // forget gate starts open
        b.slice_mut(ndarray::s![.., hidden..2 * hidden]).fill(1.0);
        let bias = store.add(format!("{name}.b"), b);
        Self {
            w_ih,
            w_hh,
            bias,
            hidden,
        }
    }

    /// One step over a batch. Rows whose `mask` entry is 0 keep their state.
    pub fn step<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        x: Var,
        state: (Var, Var),
        mask: Option<&[f64]>,
    ) -> (Var, Var) {
        let (h, c) = state;
        let w_ih = g.param(store, self.w_ih);
        let w_hh = g.param(store, self.w_hh);
        let bias = g.param(store, self.bias);
        let xi = g.matmul(x, w_ih);
        let hh = g.matmul(h, w_hh);
        let pre = g.add(xi, hh);
        let gates = g.add(pre, bias);
        let n = self.hidden;
        let i = g.slice_cols(gates, 0, n);
        let i = g.sigmoid(i);
        let f = g.slice_cols(gates, n, 2 * n);
        let f = g.sigmoid(f);
        let cand = g.slice_cols(gates, 2 * n, 3 * n);
        let cand = g.tanh(cand);
        let o = g.slice_cols(gates, 3 * n, 4 * n);
        let o = g.sigmoid(o);
        let fc = g.mul(f, c);
        let ic = g.mul(i, cand);
        let c_new = g.add(fc, ic);
        let tc = g.tanh(c_new);
        let h_new = g.mul(o, tc);
        match mask {
            Some(m) if m.iter().any(|&v| v != 1.0) => {
                let keep: Vec<f64> = m.iter().map(|v| 1.0 - v).collect();
                let h_upd = g.row_scale(h_new, m.to_vec());
                let h_old = g.row_scale(h, keep.clone());
                let c_upd = g.row_scale(c_new, m.to_vec());
                let c_old = g.row_scale(c, keep);
                (g.add(h_upd, h_old), g.add(c_upd, c_old))
            }
            _ => (h_new, c_new),
        }
    }
}

/// One bidirectional LSTM layer.
#[derive(Clone, Debug)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

impl BiLstm {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            forward: LstmCell::new(store, &format!("{name}.fwd"), input, hidden, rng),
            backward: LstmCell::new(store, &format!("{name}.bwd"), input, hidden, rng),
        }
    }

    pub fn output_width(&self) -> usize {
        2 * self.forward.hidden
    }

    /// Runs over time-major inputs `xs[t]` (batch × input). `masks[t][b]` is 1
    /// for a real position and 0 for padding; padding must be trailing.
    /// Outputs are batch × 2h per step, zero at padded positions.
    pub fn run<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        xs: &[Var],
        masks: &[Vec<f64>],
    ) -> Vec<Var> {
        let steps = xs.len();
        let batch = g.value(xs[0]).nrows();
        let hidden = self.forward.hidden;

        let mut fwd = Vec::with_capacity(steps);
        let mut state = (g.zeros(batch, hidden), g.zeros(batch, hidden));
        for t in 0..steps {
            state = self.forward.step(g, store, xs[t], state, Some(&masks[t]));
            fwd.push(state.0);
        }

        let mut bwd = vec![None; steps];
        let mut state = (g.zeros(batch, hidden), g.zeros(batch, hidden));
        for t in (0..steps).rev() {
            state = self.backward.step(g, store, xs[t], state, Some(&masks[t]));
            bwd[t] = Some(state.0);
        }

        fwd.into_iter()
            .zip(bwd)
            .zip(masks)
            .map(|((f, b), m)| {
                let both = g.concat_cols(&[f, b.expect("backward step")]);
                if m.iter().all(|&v| v == 1.0) {
                    both
                } else {
                    g.row_scale(both, m.clone())
                }
            })
            .collect()
    }
}

/// Stack of bidirectional layers; layer `l > 0` consumes layer `l-1`'s output.
#[derive(Clone, Debug)]
pub struct StackedBiLstm {
    pub layers: Vec<BiLstm>,
}

impl StackedBiLstm {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        num_layers: usize,
        rng: &mut R,
    ) -> Self {
        assert!(num_layers >= 1, "at least one recurrent layer");
        let layers = (0..num_layers)
            .map(|l| {
                let width = if l == 0 { input } else { 2 * hidden };
                BiLstm::new(store, &format!("{name}.l{l}"), width, hidden, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn run<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        xs: &[Var],
        masks: &[Vec<f64>],
    ) -> Vec<Var> {
        let mut current = xs.to_vec();
        for layer in &self.layers {
            current = layer.run(g, store, &current, masks);
        }
        current
    }
}

/// Scaled dot-product attention with `heads` parallel heads and an output
/// projection. Queries and keys may have different input widths.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
    pub model_width: usize,
}

/// Result of one attention call.
pub struct AttentionOutput {
    pub output: Var,
    /// One queries × keys weight matrix per head.
    pub weights: Vec<Var>,
}

impl MultiHeadAttention {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        query_width: usize,
        key_width: usize,
        model_width: usize,
        heads: usize,
        rng: &mut R,
    ) -> Self {
        assert!(
            heads >= 1 && model_width % heads == 0,
            "heads ({heads}) must divide the model width ({model_width})"
        );
        Self {
            query: Linear::new(store, &format!("{name}.q"), query_width, model_width, false, rng),
            key: Linear::new(store, &format!("{name}.k"), key_width, model_width, false, rng),
            value: Linear::new(store, &format!("{name}.v"), key_width, model_width, false, rng),
            output: Linear::new(store, &format!("{name}.o"), model_width, model_width, true, rng),
            heads,
            model_width,
        }
    }

    /// `q` is queries × query_width, `kv` is keys × key_width. Keys whose
    /// `key_mask` entry is false receive zero weight.
    pub fn forward<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        q: Var,
        kv: Var,
        key_mask: &[bool],
    ) -> AttentionOutput {
        let qp = self.query.forward(g, store, q);
        let kp = self.key.forward(g, store, kv);
        let vp = self.value.forward(g, store, kv);
        let width = self.model_width / self.heads;
        let scale = 1.0 / (width as f64).sqrt();
        let mut outputs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (lo, hi) = (h * width, (h + 1) * width);
            let qh = g.slice_cols(qp, lo, hi);
            let kh = g.slice_cols(kp, lo, hi);
            let vh = g.slice_cols(vp, lo, hi);
            let kt = g.transpose(kh);
            let scores = g.matmul(qh, kt);
            let scores = g.scale(scores, scale);
            let w = g.masked_softmax(scores, key_mask);
            outputs.push(g.matmul(w, vh));
            weights.push(w);
        }
        let merged = g.concat_cols(&outputs);
        let output = self.output.forward(g, store, merged);
        AttentionOutput { output, weights }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn padded_steps_do_not_change_forward_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let lstm = BiLstm::new(&mut store, "l", 3, 4, &mut rng);
        let x = Array2::from_shape_fn((2, 3), |(r, c)| (r + c) as f64 * 0.1);
        let mut g = Graph::new();
        let xs: Vec<Var> = (0..3).map(|_| g.constant(x.clone())).collect();
        // row 1 is padded after the first step
        let masks = vec![vec![1.0, 1.0], vec![1.0, 0.0], vec![1.0, 0.0]];
        let out = lstm.run(&mut g, &store, &xs, &masks);
        assert_eq!(out.len(), 3);
        assert_eq!(g.value(out[0]).dim(), (2, 8));
        assert!(g.value(out[2]).row(1).iter().all(|&v| v == 0.0));

        // the backward half at t=0 for row 1 equals a one-step run
        let mut g2 = Graph::new();
        let x1 = g2.constant(x.clone());
        let single = lstm.run(&mut g2, &store, &[x1], &[vec![1.0, 1.0]]);
        let a = g.value(out[0]).row(1).to_owned();
        let b = g2.value(single[0]).row(1).to_owned();
        for (u, v) in a.iter().zip(b.iter()) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn attention_ignores_masked_keys() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut store = ParamStore::new();
        let att = MultiHeadAttention::new(&mut store, "a", 4, 3, 4, 2, &mut rng);
        let q = Array2::from_shape_fn((3, 4), |(r, c)| (r * 4 + c) as f64 * 0.05);
        let kv = Array2::from_shape_fn((3, 3), |(r, c)| (r as f64 - c as f64) * 0.2);
        let mut g = Graph::new();
        let qv = g.constant(q);
        let kvv = g.constant(kv);
        let out = att.forward(&mut g, &store, qv, kvv, &[true, true, false]);
        assert_eq!(g.value(out.output).dim(), (3, 4));
        for w in out.weights {
            let w = g.value(w);
            for r in 0..3 {
                assert_eq!(w[[r, 2]], 0.0);
                assert!((w.row(r).sum() - 1.0).abs() < 1e-12);
            }
        }
    }
}
