use std::collections::HashMap;

use ndarray::{Array2, Zip};

use crate::nn::{ParamId, ParamStore};

pub type ParamGrads = HashMap<ParamId, Array2<f64>>;

/// Adam with decoupled weight decay.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Updates applied so far.
    pub t: u64,
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
}

impl AdamW {
    pub fn new(store: &ParamStore, lr: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Array2<f64>> = store.iter().map(|(_, _, a)| Array2::zeros(a.dim())).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, t: 0, m: zeros.clone(), v: zeros }
    }

    /// One update of every parameter that has a gradient.
    pub fn step(&mut self, store: &mut ParamStore, grads: &ParamGrads) {
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let (lr, eps, decay) = (self.lr, self.eps, 1.0 - self.lr * self.weight_decay);
        for (&id, g) in grads {
            let p = store.get_mut(id);
            Zip::from(p)
                .and(&mut self.m[id.0])
                .and(&mut self.v[id.0])
                .and(g)
                .for_each(|p, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p = *p * decay - lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
        }
    }
}

/// Global L2 norm of all gradients, summed in parameter order so the result
/// does not depend on hash-map iteration order.
pub fn grad_norm(grads: &ParamGrads) -> f64 {
    let mut ids: Vec<_> = grads.keys().copied().collect();
    ids.sort_unstable();
    ids.iter().flat_map(|id| grads[id].iter()).map(|x| x * x).sum::<f64>().sqrt()
}

/// Rescales gradients so their global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grads: &mut ParamGrads, max_norm: f64) -> f64 {
    let norm = grad_norm(grads);
    if norm > max_norm {
        let k = max_norm / norm;
        for g in grads.values_mut() {
            g.mapv_inplace(|x| x * k);
        }
    }
    norm
}
