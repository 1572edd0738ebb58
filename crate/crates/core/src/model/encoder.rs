//! Attentional recurrent encoders: a two-level one over the sentence grid for
//! the extractor, a flat one over a word sequence for the compressor.

use rand::Rng;

use crate::corpus::IndexedDocument;
use crate::error::{Error, Result};
use crate::nn::layers::{BiLstm, MultiHeadAttention, StackedBiLstm};
use crate::nn::{Graph, ParamStore, Var};

use super::ModelConfig;

fn mask_f64(mask: impl IntoIterator<Item = bool>) -> Vec<f64> {
    mask.into_iter().map(|m| if m { 1.0 } else { 0.0 }).collect()
}

fn check_finite(g: &Graph<'_>, v: Var) -> Result<Var> {
    if g.all_finite(v) {
        Ok(v)
    } else {
        Err(Error::NumericalOverflow)
    }
}

/// Encoded positions plus the attention maps that produced them.
pub struct Encoded {
    /// positions × 2h, zero rows at padding.
    pub reps: Var,
    /// Heads of the top-level attention (queries × keys each).
    pub attention: Vec<Var>,
}

/// One attentional level: recurrence, attention with `Q` = recurrent output,
/// then a bidirectional re-encoding of `[recurrent; attention]`.
#[derive(Clone, Debug)]
struct Level {
    recurrent: StackedBiLstm,
    attention: MultiHeadAttention,
    reencode: BiLstm,
}

impl Level {
    fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, cfg: &ModelConfig, rng: &mut R) -> Self {
        let width = cfg.rep_width();
        Self {
            recurrent: StackedBiLstm::new(store, &format!("{name}.lstm"), input, cfg.hidden, cfg.layers, rng),
            attention: MultiHeadAttention::new(store, &format!("{name}.attn"), width, input, width, cfg.heads, rng),
            reencode: BiLstm::new(store, &format!("{name}.out"), 2 * width, cfg.hidden, rng),
        }
    }

    /// Single sequence: `x` is positions × input.
    fn run_single<'a>(&self, g: &mut Graph<'a>, store: &'a ParamStore, x: Var, mask: &[bool]) -> Encoded {
        let n = mask.len();
        let steps: Vec<Var> = (0..n).map(|t| g.row(x, t)).collect();
        let masks: Vec<Vec<f64>> = mask.iter().map(|&m| mask_f64([m])).collect();
        let recurrent = self.recurrent.run(g, store, &steps, &masks);
        let rows: Vec<(Var, usize)> = recurrent.iter().map(|&v| (v, 0)).collect();
        let l = g.stack_rows(&rows);
        let att = self.attention.forward(g, store, l, x, mask);
        let joined = g.concat_cols(&[l, att.output]);
        let steps: Vec<Var> = (0..n).map(|t| g.row(joined, t)).collect();
        let out = self.reencode.run(g, store, &steps, &masks);
        let rows: Vec<(Var, usize)> = out.iter().map(|&v| (v, 0)).collect();
        Encoded { reps: g.stack_rows(&rows), attention: att.weights }
    }
}

/// Extractor encoder: words within each sentence, then sentences.
#[derive(Clone, Debug)]
pub struct SentenceEncoder {
    word: Level,
    sentence: Level,
}

impl SentenceEncoder {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, cfg: &ModelConfig, rng: &mut R) -> Self {
        Self {
            word: Level::new(store, &format!("{name}.word"), cfg.embedding_dim, cfg, rng),
            sentence: Level::new(store, &format!("{name}.sent"), cfg.max_words * cfg.rep_width(), cfg, rng),
        }
    }

    /// Sentence representations (max_sentences × 2h). `table` is the
    /// embedding matrix node.
    pub fn encode<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        idoc: &IndexedDocument,
        table: Var,
    ) -> Result<Encoded> {
        let (m, n) = (idoc.max_sentences(), idoc.max_words());
        let width = 2 * self.word.reencode.forward.hidden;

        // word level, batched over sentences and time-major over words
        let xs: Vec<Var> = (0..n).map(|t| g.gather_rows(table, idoc.ids.column(t).to_vec())).collect();
        let masks: Vec<Vec<f64>> = (0..n).map(|t| mask_f64(idoc.word_mask.column(t).iter().copied())).collect();
        let le = self.word.recurrent.run(g, store, &xs, &masks);

        let mut attended = Vec::with_capacity(m);
        for i in 0..m {
            if !idoc.sentence_mask[i] {
                attended.push(g.zeros(n, width));
                continue;
            }
            let q_rows: Vec<(Var, usize)> = le.iter().map(|&v| (v, i)).collect();
            let k_rows: Vec<(Var, usize)> = xs.iter().map(|&v| (v, i)).collect();
            let q = g.stack_rows(&q_rows);
            let k = g.stack_rows(&k_rows);
            let key_mask: Vec<bool> = idoc.word_mask.row(i).to_vec();
            attended.push(self.word.attention.forward(g, store, q, k, &key_mask).output);
        }
        let joined: Vec<Var> = (0..n)
            .map(|t| {
                let rows: Vec<(Var, usize)> = attended.iter().map(|&a| (a, t)).collect();
                let ae = g.stack_rows(&rows);
                g.concat_cols(&[le[t], ae])
            })
            .collect();
        let he_w = self.word.reencode.run(g, store, &joined, &masks);
        // each sentence is the concatenation of all its word outputs
        let he_ws = g.concat_cols(&he_w);

        let out = self.sentence.run_single(g, store, he_ws, &idoc.sentence_mask);
        check_finite(g, out.reps)?;
        Ok(out)
    }
}

/// Compressor encoder over one word sequence.
#[derive(Clone, Debug)]
pub struct WordEncoder {
    level: Level,
}

impl WordEncoder {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, cfg: &ModelConfig, rng: &mut R) -> Self {
        Self { level: Level::new(store, &format!("{name}.word"), cfg.embedding_dim, cfg, rng) }
    }

    /// Word representations (ids.len() × 2h).
    pub fn encode<'a>(
        &self,
        g: &mut Graph<'a>,
        store: &'a ParamStore,
        ids: &[usize],
        mask: &[bool],
        table: Var,
    ) -> Result<Encoded> {
        assert_eq!(ids.len(), mask.len(), "ids and mask differ in length");
        let x = g.gather_rows(table, ids.to_vec());
        let out = self.level.run_single(g, store, x, mask);
        check_finite(g, out.reps)?;
        Ok(out)
    }
}
