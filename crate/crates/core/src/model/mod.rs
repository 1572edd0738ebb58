//! The two agents: a sentence extractor over a hierarchical encoder and a
//! word compressor over a flat encoder, each decoding with a pointer network.

mod checkpoint;
mod config;
mod encoder;
mod pointer;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{pad_and_index, Document, EmbeddingTable, IndexedDocument, Vocab};
use crate::error::{Error, Result};
use crate::nn::{Graph, ParamStore, Var};

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use config::{Budgets, ModelConfig, Profile};
pub use encoder::{Encoded, SentenceEncoder, WordEncoder};
pub use pointer::{DecodeMode, DecodeTrace, PointerNet, PointerSequence, Selection};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryLevel {
    Sentence,
    Word,
}

/// A summary produced by one agent (or a baseline).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryCandidate {
    pub level: SummaryLevel,
    pub pointers: PointerSequence,
    /// Sentence indices in selection order, or word positions in the
    /// flattened document in ascending order.
    pub positions: Vec<usize>,
    pub token_list: Vec<String>,
    pub text: String,
}

impl SummaryCandidate {
    pub fn new(level: SummaryLevel, pointers: PointerSequence, positions: Vec<usize>, token_list: Vec<String>) -> Self {
        let text = token_list.join(" ");
        Self { level, pointers, positions, token_list, text }
    }

    pub fn tokens(&self) -> Vec<&str> {
        self.token_list.iter().map(String::as_str).collect()
    }
}

/// Words the compressor chooses from: the extracted sentences in document
/// order, truncated to the encoder's word limit.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressorInput {
    pub ids: Vec<usize>,
    pub tokens: Vec<String>,
    /// Position of each word in the flattened document.
    pub positions: Vec<usize>,
}

impl CompressorInput {
    pub fn new(doc: &Document, idoc: &IndexedDocument, sentences: &[usize]) -> Self {
        let mut order = sentences.to_vec();
        order.sort_unstable();
        let offsets = doc.sentence_offsets();
        let mut input = Self { ids: Vec::new(), tokens: Vec::new(), positions: Vec::new() };
        for i in order {
            let ids = idoc.sentence_ids(i);
            input.ids.extend_from_slice(ids);
            input.tokens.extend(doc.sentences[i][..ids.len()].iter().cloned());
            input.positions.extend((0..ids.len()).map(|j| offsets[i] + j));
        }
        input
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Selected words reordered by document position.
    pub fn candidate(&self, pointers: PointerSequence) -> SummaryCandidate {
        let mut chosen = pointers.indices.clone();
        chosen.sort_unstable_by_key(|&k| self.positions[k]);
        let positions = chosen.iter().map(|&k| self.positions[k]).collect();
        let tokens = chosen.iter().map(|&k| self.tokens[k].clone()).collect();
        SummaryCandidate::new(SummaryLevel::Word, pointers, positions, tokens)
    }
}

/// Sentences picked by `indices`, in that order.
pub fn extractive_candidate(doc: &Document, pointers: PointerSequence) -> SummaryCandidate {
    let tokens = pointers.indices.iter().flat_map(|&i| doc.sentences[i].iter().cloned()).collect();
    SummaryCandidate::new(SummaryLevel::Sentence, pointers.clone(), pointers.indices, tokens)
}

/// How a rollout chooses its pointers.
pub enum Policy<'r> {
    Greedy,
    Sample(&'r mut dyn RngCore),
    /// Replays given extractor and compressor pointer sequences.
    Forced { sentences: &'r [usize], words: &'r [usize] },
}

/// Both candidates of one pass plus the log-probability nodes of every step.
pub struct Rollout {
    pub extractive: SummaryCandidate,
    pub compressive: SummaryCandidate,
    pub extract_log_probs: Vec<Var>,
    pub compress_log_probs: Vec<Var>,
}

#[derive(Clone, Debug)]
struct Extractor {
    encoder: SentenceEncoder,
    pointer: PointerNet,
}

#[derive(Clone, Debug)]
struct Compressor {
    encoder: WordEncoder,
    pointer: PointerNet,
}

/// Extract-then-compress summarizer. Parameters are named by module path
/// (`extractor.*`, `compressor.*`).
#[derive(Clone, Debug)]
pub struct Summarizer {
    pub config: ModelConfig,
    pub params: ParamStore,
    extractor: Extractor,
    compressor: Compressor,
}

impl Summarizer {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let width = config.rep_width();
        let extractor = Extractor {
            encoder: SentenceEncoder::new(&mut params, "extractor.encoder", &config, &mut rng),
            pointer: PointerNet::new(&mut params, "extractor.pointer", width, &mut rng),
        };
        let compressor = Compressor {
            encoder: WordEncoder::new(&mut params, "compressor.encoder", &config, &mut rng),
            pointer: PointerNet::new(&mut params, "compressor.pointer", width, &mut rng),
        };
        Ok(Self { config, params, extractor, compressor })
    }

    pub fn index(&self, doc: &Document, vocab: &Vocab) -> IndexedDocument {
        pad_and_index(doc, vocab, self.config.max_sentences, self.config.max_words)
    }

    /// Sentence representations of an indexed document.
    pub fn encode_sentences<'a>(&'a self, g: &mut Graph<'a>, idoc: &IndexedDocument, table: Var) -> Result<Encoded> {
        self.extractor.encoder.encode(g, &self.params, idoc, table)
    }

    /// Word representations of a (possibly padded) id sequence.
    pub fn encode_words<'a>(&'a self, g: &mut Graph<'a>, ids: &[usize], mask: &[bool], table: Var) -> Result<Encoded> {
        self.compressor.encoder.encode(g, &self.params, ids, mask, table)
    }

    /// Runs the extractor on `idoc`.
    pub fn extract<'a>(
        &'a self,
        g: &mut Graph<'a>,
        idoc: &IndexedDocument,
        table: Var,
        budget: usize,
        selection: Selection<'_>,
    ) -> Result<DecodeTrace> {
        let enc = self.encode_sentences(g, idoc, table)?;
        self.extractor.pointer.decode(g, &self.params, enc.reps, &idoc.sentence_mask, budget, selection)
    }

    /// Runs the compressor on the given words.
    pub fn compress<'a>(
        &'a self,
        g: &mut Graph<'a>,
        input: &CompressorInput,
        table: Var,
        budget: usize,
        selection: Selection<'_>,
    ) -> Result<DecodeTrace> {
        if input.is_empty() {
            return Err(Error::EmptySummary);
        }
        let mask = vec![true; input.len()];
        let enc = self.encode_words(g, &input.ids, &mask, table)?;
        self.compressor.pointer.decode(g, &self.params, enc.reps, &mask, budget, selection)
    }

    /// Extract, then compress the extracted sentences.
    pub fn rollout<'a>(
        &'a self,
        g: &mut Graph<'a>,
        doc: &Document,
        idoc: &IndexedDocument,
        table: Var,
        budgets: Budgets,
        policy: Policy<'_>,
    ) -> Result<Rollout> {
        budgets.validate()?;
        if doc.is_empty() || idoc.sentence_count == 0 {
            return Err(Error::EmptyDocument);
        }
        let (ext, input, comp) = match policy {
            Policy::Greedy => {
                let ext = self.extract(g, idoc, table, budgets.sentences, Selection::Greedy)?;
                let input = CompressorInput::new(doc, idoc, &ext.sequence.indices);
                let comp = self.compress(g, &input, table, budgets.words, Selection::Greedy)?;
                (ext, input, comp)
            }
            Policy::Sample(rng) => {
                let ext = self.extract(g, idoc, table, budgets.sentences, Selection::Sample(&mut *rng))?;
                let input = CompressorInput::new(doc, idoc, &ext.sequence.indices);
                let comp = self.compress(g, &input, table, budgets.words, Selection::Sample(rng))?;
                (ext, input, comp)
            }
            Policy::Forced { sentences, words } => {
                let ext = self.extract(g, idoc, table, budgets.sentences, Selection::Forced(sentences))?;
                let input = CompressorInput::new(doc, idoc, &ext.sequence.indices);
                let comp = self.compress(g, &input, table, budgets.words, Selection::Forced(words))?;
                (ext, input, comp)
            }
        };
        Ok(Rollout {
            extractive: extractive_candidate(doc, ext.sequence),
            compressive: input.candidate(comp.sequence),
            extract_log_probs: ext.log_probs,
            compress_log_probs: comp.log_probs,
        })
    }

    /// Inference entry point: returns (extractive, compressive).
    pub fn summarize(
        &self,
        doc: &Document,
        vocab: &Vocab,
        embeddings: &EmbeddingTable,
        budgets: Budgets,
        mode: DecodeMode,
        seed: u64,
    ) -> Result<(SummaryCandidate, SummaryCandidate)> {
        if doc.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let idoc = self.index(doc, vocab);
        let mut g = Graph::new();
        let table = g.input(embeddings.matrix(), false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = match mode {
            DecodeMode::Greedy => Policy::Greedy,
            DecodeMode::Sampled => Policy::Sample(&mut rng),
        };
        let r = self.rollout(&mut g, doc, &idoc, table, budgets, policy)?;
        Ok((r.extractive, r.compressive))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;

    pub(crate) fn toy_config() -> ModelConfig {
        ModelConfig { embedding_dim: 6, hidden: 4, layers: 1, heads: 2, max_sentences: 4, max_words: 6 }
    }

    fn fixture() -> (Summarizer, Document, Vocab, EmbeddingTable) {
        let doc = Document::new(
            "d",
            "Markets fell sharply on Monday. Investors worried about debt. Banks cut loans to firms. The weather was mild.",
        );
        let vocab = build_vocab([&doc], 1).unwrap();
        let cfg = toy_config();
        let emb = EmbeddingTable::random(&vocab, cfg.embedding_dim, 3);
        (Summarizer::new(cfg, 7).unwrap(), doc, vocab, emb)
    }

    #[test]
    fn greedy_is_deterministic_and_within_budgets() {
        let (model, doc, vocab, emb) = fixture();
        let budgets = Budgets { sentences: 2, words: 5 };
        let a = model.summarize(&doc, &vocab, &emb, budgets, DecodeMode::Greedy, 1).unwrap();
        let b = model.summarize(&doc, &vocab, &emb, budgets, DecodeMode::Greedy, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.pointers.len(), 2);
        assert!(a.1.token_list.len() <= 5);
    }

    #[test]
    fn compressive_tokens_are_position_ordered_subset_of_extraction() {
        let (model, doc, vocab, emb) = fixture();
        let flat: Vec<&str> = doc.tokens().collect();
        for seed in 0..20 {
            let budgets = Budgets { sentences: 2, words: 4 };
            let (ext, comp) = model.summarize(&doc, &vocab, &emb, budgets, DecodeMode::Sampled, seed).unwrap();
            assert!(comp.positions.windows(2).all(|w| w[0] < w[1]));
            let offsets = doc.sentence_offsets();
            for (&p, t) in comp.positions.iter().zip(&comp.token_list) {
                assert_eq!(flat[p], t);
                let sentence = offsets.iter().rposition(|&o| o <= p).unwrap();
                assert!(ext.positions.contains(&sentence));
            }
            assert_eq!(comp.text, comp.token_list.join(" "));
        }
    }

    #[test]
    fn reordering_contract() {
        let doc = Document::new("d", "w0 w1 w2 w3 w4");
        let vocab = build_vocab([&doc], 1).unwrap();
        let idoc = pad_and_index(&doc, &vocab, 2, 6);
        let input = CompressorInput::new(&doc, &idoc, &[0]);
        let seq = PointerSequence { indices: vec![3, 0], step_log_probs: vec![-1.0, -1.0], mode: DecodeMode::Greedy, truncated: false };
        assert_eq!(input.candidate(seq).text, "w0 w3");
    }

    #[test]
    fn one_sentence_document_truncates_extraction() {
        let (model, _, vocab, emb) = fixture();
        let doc = Document::new("one", "Banks cut loans to firms.");
        let (ext, _) = model.summarize(&doc, &vocab, &emb, Budgets { sentences: 3, words: 4 }, DecodeMode::Greedy, 0).unwrap();
        assert_eq!(ext.pointers.indices, vec![0]);
        assert!(ext.pointers.truncated);
    }

    #[test]
    fn empty_document_is_rejected() {
        let (model, _, vocab, emb) = fixture();
        let doc = Document::new("e", "   ");
        let err = model.summarize(&doc, &vocab, &emb, Budgets { sentences: 1, words: 1 }, DecodeMode::Greedy, 0);
        assert!(matches!(err, Err(Error::EmptyDocument)));
    }

    #[test]
    fn forced_rollout_gradient_matches_finite_differences() {
        let (mut model, doc, vocab, emb) = fixture();
        model.config.hidden = 4;
        let idoc = model.index(&doc, &vocab);
        let budgets = Budgets { sentences: 2, words: 4 };
        let (ext, comp) = model.summarize(&doc, &vocab, &emb, budgets, DecodeMode::Sampled, 5).unwrap();
        let words = comp.pointers.indices.clone();
        let objective = |m: &Summarizer, grads: bool| {
            let mut g = Graph::new();
            let table = g.input(emb.matrix(), false);
            let policy = Policy::Forced { sentences: &ext.pointers.indices, words: &words };
            let r = m.rollout(&mut g, &doc, &idoc, table, budgets, policy).unwrap();
            let all: Vec<Var> = r.extract_log_probs.iter().chain(&r.compress_log_probs).copied().collect();
            let s = g.add_all(&all);
            let grads = grads.then(|| g.param_gradients(&g.backward(s)));
            (g.scalar(s), grads)
        };
        let (_, grads) = objective(&model, true);
        let grads = grads.unwrap();
        let ids: Vec<_> = model.params.ids().collect();
        let h = 1e-5;
        let (mut ok, mut total) = (0, 0);
        for (n, &id) in ids.iter().enumerate().step_by(3) {
            let len = model.params.get(id).len();
            let k = (n * 7) % len;
            let mut plus = model.clone();
            plus.params.get_mut(id).as_slice_mut().unwrap()[k] += h;
            let mut minus = model.clone();
            minus.params.get_mut(id).as_slice_mut().unwrap()[k] -= h;
            let fd = (objective(&plus, false).0 - objective(&minus, false).0) / (2.0 * h);
            let an = grads.get(&id).map_or(0.0, |gr| gr.iter().nth(k).copied().unwrap());
            let err = (fd - an).abs();
            total += 1;
            if err <= 1e-3 * fd.abs().max(an.abs()) || err < 1e-8 {
                ok += 1;
            }
        }
        assert!(ok * 100 >= total * 95, "{ok}/{total}");
    }
}
