//! Pointer-network decoder shared by both agents.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::graph::masked_softmax_row;
use crate::nn::layers::{Linear, LstmCell};
use crate::nn::{Graph, ParamId, ParamStore, Var};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    #[default]
    Greedy,
    Sampled,
}

impl std::str::FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Self::Greedy),
            "sampled" | "sample" => Ok(Self::Sampled),
            _ => Err(Error::InvalidArgument(format!("unknown mode {s:?} (greedy, sampled)"))),
        }
    }
}

/// How each step's index is chosen.
pub enum Selection<'r> {
    /// Highest probability, ties to the lowest index.
    Greedy,
    /// Draw from the step distribution.
    Sample(&'r mut dyn RngCore),
    /// Replay a given sequence (teacher forcing).
    Forced(&'r [usize]),
}

impl Selection<'_> {
    fn mode(&self) -> DecodeMode {
        match self {
            Selection::Greedy => DecodeMode::Greedy,
            _ => DecodeMode::Sampled,
        }
    }
}

/// Ordered selections of one decode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointerSequence {
    pub indices: Vec<usize>,
    /// Log-probability of each chosen index at its step.
    pub step_log_probs: Vec<f64>,
    pub mode: DecodeMode,
    /// The budget exceeded the number of real positions.
    pub truncated: bool,
}

impl PointerSequence {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn total_log_prob(&self) -> f64 {
        self.step_log_probs.iter().sum()
    }
}

/// A decode together with its graph nodes.
pub struct DecodeTrace {
    pub sequence: PointerSequence,
    /// 1×1 log-probability nodes, one per step.
    pub log_probs: Vec<Var>,
    /// Full distribution over positions at every step.
    pub distributions: Vec<Vec<f64>>,
}

/// LSTM decoder with a glimpse over the encoded positions before pointing.
#[derive(Clone, Debug)]
pub struct PointerNet {
    cell: LstmCell,
    start: ParamId,
    w1: ParamId,
    w2: ParamId,
    v: ParamId,
    /// Maps `[de; de']` back to the cell width.
    glimpse: Linear,
}

impl PointerNet {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, width: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (width as f64).sqrt();
        Self {
            cell: LstmCell::new(store, &format!("{name}.cell"), width, width, rng),
            start: store.add_uniform(format!("{name}.start"), (1, width), bound, rng),
            w1: store.add_uniform(format!("{name}.w1"), (width, width), bound, rng),
            w2: store.add_uniform(format!("{name}.w2"), (width, width), bound, rng),
            v: store.add_uniform(format!("{name}.v"), (width, 1), bound, rng),
            glimpse: Linear::new(store, &format!("{name}.glimpse"), 2 * width, width, true, rng),
        }
    }

    /// Decodes up to `budget` distinct real positions of `reps` (positions ×
    /// width). Pads and earlier selections are excluded at every step.
    pub fn decode<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        reps: Var,
        mask: &[bool],
        budget: usize,
        mut selection: Selection<'_>,
    ) -> Result<DecodeTrace> {
        let available = mask.iter().filter(|&&m| m).count();
        if budget == 0 {
            return Err(Error::InvalidArgument("pointer budget must be at least 1".into()));
        }
        if available == 0 {
            return Err(Error::EmptyDocument);
        }
        let steps = match &selection {
            Selection::Forced(idx) => idx.len(),
            _ => budget.min(available),
        };
        let mode = selection.mode();

        let width = self.cell.hidden;
        let w1 = g.param(store, self.w1);
        let w2 = g.param(store, self.w2);
        let v = g.param(store, self.v);
        let keys = g.matmul(reps, w1);
        let score = |g: &mut Graph<'a>, query: Var| {
            let q = g.matmul(query, w2);
            let pre = g.add(keys, q);
            let act = g.tanh(pre);
            let u = g.matmul(act, v);
            g.transpose(u)
        };

        let mut state = (g.zeros(1, width), g.zeros(1, width));
        let mut input = g.param(store, self.start);
        let mut open = mask.to_vec();
        let mut trace = DecodeTrace {
            sequence: PointerSequence { indices: Vec::new(), step_log_probs: Vec::new(), mode, truncated: budget > available },
            log_probs: Vec::new(),
            distributions: Vec::new(),
        };
        for k in 0..steps {
            state = self.cell.step(g, store, input, state, None);
            let de = state.0;
            let glimpse_scores = score(g, de);
            let weights = g.masked_softmax(glimpse_scores, mask);
            let context = g.matmul(weights, reps);
            let joined = g.concat_cols(&[de, context]);
            let de = self.glimpse.forward(g, store, joined);
            let scores = score(g, de);

            let probs = masked_softmax_row(g.value(scores).row(0).iter().copied(), &open);
            let index = match &mut selection {
                Selection::Greedy => argmax(&probs, &open),
                Selection::Sample(rng) => sample(&probs, &open, rng),
                Selection::Forced(idx) => {
                    let i = idx[k];
                    if i >= open.len() || !open[i] {
                        return Err(Error::InvalidArgument(format!("forced index {i} is not selectable")));
                    }
                    i
                }
            };
            let lp = g.log_softmax_at(scores, open.clone(), index);
            trace.sequence.indices.push(index);
            trace.sequence.step_log_probs.push(g.scalar(lp));
            trace.log_probs.push(lp);
            trace.distributions.push(probs);
            open[index] = false;
            input = g.row(reps, index);
        }
        Ok(trace)
    }
}

fn argmax(probs: &[f64], open: &[bool]) -> usize {
    let mut best = None;
    for (i, (&p, &o)) in probs.iter().zip(open).enumerate() {
        if o && best.is_none_or(|b: usize| p > probs[b]) {
            best = Some(i);
        }
    }
    best.expect("at least one open position")
}

fn sample(probs: &[f64], open: &[bool], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = None;
    for (i, (&p, &o)) in probs.iter().zip(open).enumerate() {
        if !o || p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(i);
        if u < acc {
            return i;
        }
    }
    // rounding left u above the accumulated mass
    last.unwrap_or_else(|| argmax(probs, open))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(width: usize, seed: u64) -> (ParamStore, PointerNet) {
        let mut store = ParamStore::new();
        let net = PointerNet::new(&mut store, "p", width, &mut ChaCha8Rng::seed_from_u64(seed));
        (store, net)
    }

    fn reps(n: usize, width: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, width), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 10.0 - 0.5)
    }

    #[test]
    fn forced_single_position() {
        let (store, p) = net(4, 1);
        let r = reps(3, 4);
        let mut g = Graph::new();
        let rv = g.input(&r, false);
        let t = p.decode(&mut g, &store, rv, &[false, true, false], 1, Selection::Greedy).unwrap();
        assert_eq!(t.sequence.indices, vec![1]);
        assert_eq!(t.sequence.step_log_probs, vec![0.0]);
    }

    #[test]
    fn budget_past_real_positions_truncates() {
        let (store, p) = net(4, 1);
        let r = reps(4, 4);
        let mut g = Graph::new();
        let rv = g.input(&r, false);
        let mask = [true, true, false, false];
        let t = p.decode(&mut g, &store, rv, &mask, 3, Selection::Greedy).unwrap();
        assert!(t.sequence.truncated);
        let mut idx = t.sequence.indices.clone();
        idx.sort();
        assert_eq!(idx, vec![0, 1]);
    }

    #[test]
    fn zero_params_give_uniform_first_step() {
        let (mut store, p) = net(4, 1);
        for id in store.ids().collect::<Vec<_>>() {
            store.get_mut(id).fill(0.0);
        }
        let r = reps(6, 4);
        let mask = [true, true, false, true, true, false];
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let draws = 10_000;
        let mut counts = [0usize; 6];
        for _ in 0..draws {
            let mut g = Graph::new();
            let rv = g.input(&r, false);
            let t = p.decode(&mut g, &store, rv, &mask, 1, Selection::Sample(&mut rng)).unwrap();
            assert!(t.distributions[0].iter().zip(mask).all(|(&q, m)| if m { q == 0.25 } else { q == 0.0 }));
            counts[t.sequence.indices[0]] += 1;
        }
        let sigma = (draws as f64 * 0.25 * 0.75).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            if mask[i] {
                assert!((c as f64 - 2500.0).abs() <= 3.0 * sigma, "position {i}: {c}");
            } else {
                assert_eq!(c, 0);
            }
        }
    }

    #[test]
    fn log_probs_match_distributions_and_forcing_replays() {
        let (store, p) = net(6, 5);
        let r = reps(7, 6);
        let mask = [true, true, true, true, true, false, false];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut g = Graph::new();
        let rv = g.input(&r, false);
        let t = p.decode(&mut g, &store, rv, &mask, 4, Selection::Sample(&mut rng)).unwrap();
        for (k, &i) in t.sequence.indices.iter().enumerate() {
            let d = &t.distributions[k];
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((t.sequence.step_log_probs[k] - d[i].ln()).abs() < 1e-12);
        }
        let mut g2 = Graph::new();
        let rv = g2.input(&r, false);
        let replay = p.decode(&mut g2, &store, rv, &mask, 4, Selection::Forced(&t.sequence.indices)).unwrap();
        assert_eq!(replay.sequence.indices, t.sequence.indices);
        assert_eq!(replay.sequence.step_log_probs, t.sequence.step_log_probs);
    }

    #[test]
    fn greedy_ties_go_to_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4], &[true, true, true]), 1);
        assert_eq!(argmax(&[0.5, 0.25, 0.25], &[false, true, true]), 1);
    }

    #[test]
    fn forcing_a_masked_index_fails() {
        let (store, p) = net(4, 1);
        let r = reps(3, 4);
        let mut g = Graph::new();
        let rv = g.input(&r, false);
        let res = p.decode(&mut g, &store, rv, &[true, false, true], 2, Selection::Forced(&[0, 0]));
        assert!(res.is_err());
    }

    proptest::proptest! {
        #[test]
        fn selections_distinct_and_unmasked(
            mask in proptest::collection::vec(proptest::bool::ANY, 1..9),
            budget in 1usize..10,
            seed in 0u64..1000,
        ) {
            proptest::prop_assume!(mask.iter().any(|&m| m));
            let (store, p) = net(4, seed);
            let r = reps(mask.len(), 4);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut g = Graph::new();
            let rv = g.input(&r, false);
            let t = p.decode(&mut g, &store, rv, &mask, budget, Selection::Sample(&mut rng)).unwrap();
            let real = mask.iter().filter(|&&m| m).count();
            proptest::prop_assert_eq!(t.sequence.len(), budget.min(real));
            let mut seen = std::collections::HashSet::new();
            for &i in &t.sequence.indices {
                proptest::prop_assert!(mask[i]);
                proptest::prop_assert!(seen.insert(i));
            }
        }
    }
}
