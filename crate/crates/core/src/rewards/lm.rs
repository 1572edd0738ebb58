//! Language models behind the fluency reward.
//!
//! [`KneserNeyLm`] is an interpolated Kneser-Ney n-gram model (order 3 by
//! default) and [`UnigramModel`] is the add-one unigram used for the
//! rare-word correction in SLOR. Anything implementing [`SequenceScorer`] can
//! stand in for the n-gram model.

use std::collections::HashMap;
use std::sync::Arc;

/// `ln(1e-10)`: no event scores below this.
pub const LOG_PROB_FLOOR: f64 = -23.025850929940457;

const BOS: &str = "<s>";
const UNK: &str = "<unk>";

/// Scores a token sequence with a natural-log probability.
pub trait SequenceScorer: Send + Sync {
    fn log_prob(&self, tokens: &[&str]) -> f64;
}

/// Add-one smoothed unigram distribution over the training vocabulary plus an
/// unknown-token slot.
#[derive(Clone, Debug)]
pub struct UnigramModel {
    log_probs: HashMap<String, f64>,
    unk_log_prob: f64,
}

impl UnigramModel {
    pub fn train<'a, S, I>(sentences: S) -> Self
    where
        S: IntoIterator<Item = I>,
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        let mut total = 0u64;
        for sentence in sentences {
            for t in sentence {
                *counts.entry(t).or_default() += 1;
                total += 1;
            }
        }
        let size = counts.len() as f64 + 1.0;
        let denom = total as f64 + size;
        let log_probs = counts
            .into_iter()
            .map(|(t, c)| (t.to_string(), ((c as f64 + 1.0) / denom).ln().max(LOG_PROB_FLOOR)))
            .collect();
        Self {
            log_probs,
            unk_log_prob: (1.0 / denom).ln().max(LOG_PROB_FLOOR),
        }
    }

    /// Builds a model from explicit probabilities. Missing tokens fall back to
    /// `unk_prob`.
    pub fn from_probs<'a>(probs: impl IntoIterator<Item = (&'a str, f64)>, unk_prob: f64) -> Self {
        Self {
            log_probs: probs
                .into_iter()
                .map(|(t, p)| (t.to_string(), p.ln().max(LOG_PROB_FLOOR)))
                .collect(),
            unk_log_prob: unk_prob.ln().max(LOG_PROB_FLOOR),
        }
    }

    pub fn token_log_prob(&self, token: &str) -> f64 {
        self.log_probs.get(token).copied().unwrap_or(self.unk_log_prob)
    }

    /// Number of known tokens (excluding the unknown slot).
    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    /// Total probability of the known tokens plus the unknown slot.
    pub fn total_mass(&self) -> f64 {
        self.log_probs.values().map(|l| l.exp()).sum::<f64>() + self.unk_log_prob.exp()
    }
}

impl SequenceScorer for UnigramModel {
    fn log_prob(&self, tokens: &[&str]) -> f64 {
        tokens.iter().map(|t| self.token_log_prob(t)).sum()
    }
}

type Id = u32;

#[derive(Default, Debug, Clone)]
struct ContextStats {
    /// Sum of counts of all continuations.
    total: f64,
    /// Distinct continuations.
    types: f64,
}

/// Interpolated Kneser-Ney n-gram model. Sentences are left-padded with
/// `order - 1` start symbols; no end-of-sentence event is modelled, so a
/// sequence's probability is the product of its per-token conditionals.
#[derive(Clone, Debug)]
pub struct KneserNeyLm {
    order: usize,
    ids: HashMap<String, Id>,
    vocab_size: f64,
    /// `counts[k]` holds (k+1)-gram counts: raw for the top order,
    /// continuation counts below it.
    counts: Vec<HashMap<Vec<Id>, f64>>,
    /// Per-order statistics of each context (the n-gram minus its last token).
    contexts: Vec<HashMap<Vec<Id>, ContextStats>>,
    discounts: Vec<f64>,
}

impl KneserNeyLm {
    pub fn train<'a, S, I>(sentences: S, order: usize) -> Self
    where
        S: IntoIterator<Item = I>,
        I: IntoIterator<Item = &'a str>,
    {
        assert!(order >= 1, "order must be positive");
        let mut ids: HashMap<String, Id> = HashMap::new();
        ids.insert(BOS.to_string(), 0);
        ids.insert(UNK.to_string(), 1);
        let mut top: HashMap<Vec<Id>, f64> = HashMap::new();
        for sentence in sentences {
            let mut seq: Vec<Id> = vec![0; order - 1];
            for t in sentence {
                let next = ids.len() as Id;
                seq.push(*ids.entry(t.to_string()).or_insert(next));
            }
            for w in (order - 1)..seq.len() {
                *top.entry(seq[w + 1 - order..=w].to_vec()).or_default() += 1.0;
            }
        }

        // continuation counts: N1+(• w_2..w_k) for every lower order
        let mut counts = vec![HashMap::new(); order];
        counts[order - 1] = top;
        for k in (0..order - 1).rev() {
            let mut lower: HashMap<Vec<Id>, f64> = HashMap::new();
            for gram in counts[k + 1].keys() {
                *lower.entry(gram[1..].to_vec()).or_default() += 1.0;
            }
            counts[k] = lower;
        }

        let contexts = counts
            .iter()
            .map(|table| {
                let mut ctx: HashMap<Vec<Id>, ContextStats> = HashMap::new();
                for (gram, &c) in table {
                    let e = ctx.entry(gram[..gram.len() - 1].to_vec()).or_default();
                    e.total += c;
                    e.types += 1.0;
                }
                ctx
            })
            .collect();

        let discounts = counts
            .iter()
            .map(|table| {
                let n1 = table.values().filter(|&&c| c == 1.0).count() as f64;
                let n2 = table.values().filter(|&&c| c == 2.0).count() as f64;
                let d = n1 / (n1 + 2.0 * n2);
                if d.is_finite() && d > 0.0 && d < 1.0 { d } else { 0.75 }
            })
            .collect();

        // the start symbol is never predicted
        let vocab_size = (ids.len() - 1) as f64;
        Self {
            order,
            ids,
            vocab_size,
            counts,
            contexts,
            discounts,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discounts(&self) -> &[f64] {
        &self.discounts
    }

    fn id(&self, token: &str) -> Id {
        self.ids.get(token).copied().unwrap_or(1)
    }

    /// Interpolated probability of `gram`'s last token given the rest.
    fn prob(&self, gram: &[Id]) -> f64 {
        let k = gram.len() - 1;
        let lower = if k == 0 {
            1.0 / self.vocab_size
        } else {
            self.prob(&gram[1..])
        };
        let Some(ctx) = self.contexts[k].get(&gram[..k]) else {
            return lower;
        };
        let d = self.discounts[k];
        let c = self.counts[k].get(gram).copied().unwrap_or(0.0);
        (c - d).max(0.0) / ctx.total + d * ctx.types / ctx.total * lower
    }

    /// `P(token | history)` using at most `order - 1` tokens of history.
    pub fn conditional(&self, history: &[&str], token: &str) -> f64 {
        let mut gram: Vec<Id> = vec![0; self.order - 1];
        gram.extend(history.iter().map(|t| self.id(t)));
        let start = gram.len() + 1 - self.order;
        let mut gram = gram[start..].to_vec();
        gram.push(self.id(token));
        self.prob(&gram)
    }

    /// Every predictable token (the vocabulary minus the start symbol).
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.ids.keys().map(String::as_str).filter(|t| *t != BOS)
    }
}

impl SequenceScorer for KneserNeyLm {
    fn log_prob(&self, tokens: &[&str]) -> f64 {
        (0..tokens.len())
            .map(|i| {
                let lo = i.saturating_sub(self.order - 1);
                self.conditional(&tokens[lo..i], tokens[i]).ln().max(LOG_PROB_FLOOR)
            })
            .sum()
    }
}

/// Sequence scorer plus the unigram table that SLOR subtracts.
#[derive(Clone)]
pub struct LanguageModelHandle {
    pub scorer: Arc<dyn SequenceScorer>,
    pub unigram: Arc<UnigramModel>,
}

impl std::fmt::Debug for LanguageModelHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LanguageModelHandle")
            .field("unigram_tokens", &self.unigram.len())
            .finish_non_exhaustive()
    }
}

impl LanguageModelHandle {
    pub fn new(scorer: Arc<dyn SequenceScorer>, unigram: Arc<UnigramModel>) -> Self {
        Self { scorer, unigram }
    }

    /// Default fluency model: a Kneser-Ney model of `order` and the add-one
    /// unigram, both fit on the same sentences.
    pub fn train<'a, S, I>(sentences: S, order: usize) -> Self
    where
        S: IntoIterator<Item = I> + Clone,
        I: IntoIterator<Item = &'a str>,
    {
        let unigram = UnigramModel::train(sentences.clone());
        let ngram = KneserNeyLm::train(sentences, order);
        Self::new(Arc::new(ngram), Arc::new(unigram))
    }

    /// Uses the unigram model as the sequence scorer too (SLOR is then zero).
    pub fn unigram_only(unigram: UnigramModel) -> Self {
        let unigram = Arc::new(unigram);
        Self::new(unigram.clone(), unigram)
    }
}
