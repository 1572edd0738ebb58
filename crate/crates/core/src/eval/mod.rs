//! ROUGE scoring, LEAD baselines, and evaluation reports.

mod rouge;

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{load_reference_dataset, segment_document, Document, EmbeddingTable, Vocab};
use crate::error::{Error, Result};
use crate::model::{Budgets, DecodeMode, PointerSequence, Summarizer, SummaryCandidate, SummaryLevel};

pub use rouge::{lcs_len, rouge, rouge_l, rouge_n, Prf, RougeScores};

fn fixed_pointers(n: usize) -> PointerSequence {
    PointerSequence { indices: (0..n).collect(), step_log_probs: vec![0.0; n], mode: DecodeMode::Greedy, truncated: false }
}

/// The first `budget` sentences.
pub fn lead_baseline(doc: &Document, budget: usize) -> Result<SummaryCandidate> {
    if budget == 0 {
        return Err(Error::InvalidArgument("LEAD needs at least one sentence".into()));
    }
    if doc.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let k = budget.min(doc.num_sentences());
    let mut ptr = fixed_pointers(k);
    ptr.truncated = budget > k;
    let tokens = doc.sentences[..k].iter().flatten().cloned().collect();
    Ok(SummaryCandidate::new(SummaryLevel::Sentence, ptr, (0..k).collect(), tokens))
}

/// The first `budget` words.
pub fn lead_word_baseline(doc: &Document, budget: usize) -> Result<SummaryCandidate> {
    if budget == 0 {
        return Err(Error::InvalidArgument("LEAD-WORD needs at least one word".into()));
    }
    if doc.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let tokens: Vec<String> = doc.tokens().take(budget).map(str::to_string).collect();
    let k = tokens.len();
    let mut ptr = fixed_pointers(k);
    ptr.truncated = budget > k;
    Ok(SummaryCandidate::new(SummaryLevel::Word, ptr, (0..k).collect(), tokens))
}

/// Anything that can summarize a document for evaluation.
pub trait SummarySystem: Sync {
    fn name(&self) -> String;
    fn summarize(&self, doc: &Document, budgets: Budgets, seed: u64) -> Result<SummaryCandidate>;
}

pub struct Lead;

impl SummarySystem for Lead {
    fn name(&self) -> String {
        "LEAD".into()
    }

    fn summarize(&self, doc: &Document, budgets: Budgets, _seed: u64) -> Result<SummaryCandidate> {
        lead_baseline(doc, budgets.sentences)
    }
}

pub struct LeadWord;

impl SummarySystem for LeadWord {
    fn name(&self) -> String {
        "LEAD-WORD".into()
    }

    fn summarize(&self, doc: &Document, budgets: Budgets, _seed: u64) -> Result<SummaryCandidate> {
        lead_word_baseline(doc, budgets.words)
    }
}

/// A trained model, reporting either its extractive or its final output.
pub struct ModelSystem<'m> {
    pub label: String,
    pub model: &'m Summarizer,
    pub vocab: &'m Vocab,
    pub embeddings: &'m EmbeddingTable,
    pub level: SummaryLevel,
    pub mode: DecodeMode,
}

impl SummarySystem for ModelSystem<'_> {
    fn name(&self) -> String {
        match self.level {
            SummaryLevel::Sentence => format!("{} (Ext.)", self.label),
            SummaryLevel::Word => format!("{} (Ext.+Com.)", self.label),
        }
    }

    fn summarize(&self, doc: &Document, budgets: Budgets, seed: u64) -> Result<SummaryCandidate> {
        let (ext, comp) = self.model.summarize(doc, self.vocab, self.embeddings, budgets, self.mode, seed)?;
        Ok(match self.level {
            SummaryLevel::Sentence => ext,
            SummaryLevel::Word => comp,
        })
    }
}

/// One system's mean scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub system: String,
    pub scores: RougeScores,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub sample_size: usize,
    pub seed: u64,
    pub budgets: Budgets,
    pub config_hash: String,
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn row(&self, system: &str) -> Option<&RougeScores> {
        self.rows.iter().find(|r| r.system == system).map(|r| &r.scores)
    }

    /// Plain-text table, one row per system.
    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.system.len()).max().unwrap_or(6).max(6);
        let mut out = format!(
            "dataset: {}  sample: {}  seed: {}  L_E: {}  L_C: {}  config: {}\n",
            self.dataset,
            self.sample_size,
            self.seed,
            self.budgets.sentences,
            self.budgets.words,
            &self.config_hash[..12.min(self.config_hash.len())]
        );
        let _ = writeln!(out, "{:<width$}  {:>7}  {:>7}  {:>7}", "System", "R-1", "R-2", "R-L");
        for r in &self.rows {
            let s = &r.scores;
            let _ = writeln!(out, "{:<width$}  {:>7.1}  {:>7.1}  {:>7.1}", r.system, s.rouge1_f, s.rouge2_f, s.rouge_l_f);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Deterministic sample of `size` items (all of them, in order, if `size`
/// covers the set).
pub fn sample_indices(n: usize, size: usize, seed: u64) -> Vec<usize> {
    if size >= n {
        return (0..n).collect();
    }
    let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), n, size).into_vec();
    idx.sort_unstable();
    idx
}

/// Scores every system on the same documents.
pub fn evaluate_documents(
    dataset: &str,
    docs: &[Document],
    systems: &[&dyn SummarySystem],
    budgets: Budgets,
    seed: u64,
) -> Result<EvalReport> {
    budgets.validate()?;
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let references: Vec<Vec<String>> = docs
        .iter()
        .map(|d| {
            let text = d.source_summary.as_deref().ok_or_else(|| Error::InvalidArgument(format!("document {} has no reference", d.id)))?;
            Ok(segment_document(text).tokens().map(str::to_string).collect())
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(systems.len());
    for system in systems {
        let scores: Vec<RougeScores> = docs
            .par_iter()
            .zip(&references)
            .enumerate()
            .map(|(i, (doc, reference))| {
                if doc.is_empty() {
                    return rouge::<String>(&[], reference);
                }
                let summary = system.summarize(doc, budgets, seed.wrapping_add(i as u64))?;
                rouge(&summary.token_list, reference)
            })
            .collect::<Result<_>>()?;
        rows.push(ReportRow { system: system.name(), scores: RougeScores::mean(&scores) });
    }
    let names: Vec<String> = systems.iter().map(|s| s.name()).collect();
    let hash_input = serde_json::json!({
        "dataset": dataset,
        "sample_size": docs.len(),
        "seed": seed,
        "budgets": budgets,
        "systems": names,
    });
    let digest = Sha256::digest(hash_input.to_string().as_bytes());
    let config_hash = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(EvalReport { dataset: dataset.to_string(), sample_size: docs.len(), seed, budgets, config_hash, rows })
}

/// Loads a reference dataset, draws a fixed-seed sample and scores every system.
pub fn evaluate(
    path: impl AsRef<Path>,
    systems: &[&dyn SummarySystem],
    sample_size: usize,
    budgets: Budgets,
    seed: u64,
) -> Result<EvalReport> {
    let path = path.as_ref();
    if sample_size == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let all = load_reference_dataset(path)?;
    let docs: Vec<Document> = sample_indices(all.len(), sample_size, seed).into_iter().map(|i| all[i].clone()).collect();
    let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    evaluate_documents(&name, &docs, systems, budgets, seed)
}
