//! Self-critical training of both agents against the compressive-summary
//! reward, with checkpointing and a JSON-lines metrics log.

mod config;
mod optim;
mod scst;

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_vocab, load_documents, load_embeddings, Document, EmbeddingTable, IndexedDocument, Stopwords, Vocab};
use crate::error::{Error, Result};
use crate::model::{Checkpoint, DecodeMode, Summarizer};
use crate::rewards::{CoverageContext, LanguageModelHandle, RewardBreakdown, RewardModel};

pub use config::TrainConfig;
pub use optim::{clip_grad_norm, grad_norm, AdamW, ParamGrads};
pub use scst::{doc_outcome, policy_log_prob, rollout_seed, scst_step, DocOutcome, RewardFn, Rollouts, StepMetrics, StepOptions};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

/// Vocabulary, vectors and reward models shared by training and scoring.
pub struct Resources {
    pub vocab: Vocab,
    pub embeddings: EmbeddingTable,
    pub stopwords: Stopwords,
    pub lm: LanguageModelHandle,
}

impl Resources {
    /// Builds everything from the training documents alone.
    pub fn build(docs: &[Document], config: &TrainConfig, stopwords: Stopwords) -> Result<Self> {
        let vocab = build_vocab(docs.iter(), config.min_count)?;
        let embeddings = match &config.embeddings {
            Some(path) => load_embeddings(path, &vocab, config.model.embedding_dim, config.seed)?,
            None => EmbeddingTable::random(&vocab, config.model.embedding_dim, config.seed),
        };
        Ok(Self::with_vectors(docs, vocab, embeddings, stopwords, config.lm_order))
    }

    /// Uses the given vocabulary and vectors; the language models are fit on `docs`.
    pub fn with_vectors(
        docs: &[Document],
        vocab: Vocab,
        embeddings: EmbeddingTable,
        stopwords: Stopwords,
        lm_order: usize,
    ) -> Self {
        let sentences = docs.iter().flat_map(|d| d.sentences.iter().map(|s| s.iter().map(String::as_str)));
        let lm = LanguageModelHandle::train(sentences, lm_order);
        Self { vocab, embeddings, stopwords, lm }
    }

    pub fn reward_model(&self, config: &TrainConfig) -> RewardModel<'_> {
        RewardModel {
            coverage: CoverageContext {
                vocab: &self.vocab,
                embeddings: &self.embeddings,
                stopwords: &self.stopwords,
                solver: config.solver(),
            },
            lm: &self.lm,
            weights: config.weights(),
        }
    }
}

/// Scores a compressive summary against its document.
pub fn score_summary(reward: &RewardModel<'_>, doc: &Document, summary: &[&str]) -> RewardBreakdown {
    let doc_tokens: Vec<&str> = doc.tokens().collect();
    reward.score(&doc_tokens, summary)
}

/// Model, optimizer and data of one run.
pub struct Trainer {
    pub config: TrainConfig,
    pub model: Summarizer,
    pub optimizer: AdamW,
    /// Updates attempted so far (skipped ones included).
    pub step: u64,
    pub resources: Resources,
    docs: Vec<Document>,
    indexed: Vec<IndexedDocument>,
}

#[derive(Serialize, Deserialize)]
struct TrainExtra {
    train_config: TrainConfig,
    optimizer_t: u64,
}

impl Trainer {
    /// Fresh run. Documents without sentences are dropped.
    pub fn new(config: TrainConfig, docs: Vec<Document>, resources: Resources) -> Result<Self> {
        config.validate()?;
        let model = Summarizer::new(config.model.clone(), config.seed)?;
        if resources.embeddings.dim() != config.model.embedding_dim {
            return Err(Error::Config(format!(
                "embedding_dim is {} but the vectors have {} columns",
                config.model.embedding_dim,
                resources.embeddings.dim()
            )));
        }
        let optimizer = AdamW::new(&model.params, config.learning_rate, config.weight_decay);
        Self::assemble(config, model, optimizer, 0, docs, resources)
    }

    /// Continues a run from a checkpoint written by [`Trainer::checkpoint`].
    pub fn resume(ck: &Checkpoint, docs: Vec<Document>, stopwords: Stopwords) -> Result<Self> {
        let extra: TrainExtra = serde_json::from_value(ck.extra.clone())
            .map_err(|e| Error::Checkpoint(format!("not a training checkpoint: {e}")))?;
        let (model, vocab, embeddings) = Summarizer::from_checkpoint(ck)?;
        let config = extra.train_config;
        let mut optimizer = AdamW::new(&model.params, config.learning_rate, config.weight_decay);
        optimizer.t = extra.optimizer_t;
        for (id, name, _) in model.params.iter() {
            for (slot, kind) in [(&mut optimizer.m, "m"), (&mut optimizer.v, "v")] {
                let key = format!("optim.{kind}/{name}");
                let a = ck.array(&key).ok_or_else(|| Error::Checkpoint(format!("missing array {key}")))?;
                slot[id.0].assign(a);
            }
        }
        let resources = Resources::with_vectors(&docs, vocab, embeddings, stopwords, config.lm_order);
        Self::assemble(config, model, optimizer, ck.step, docs, resources)
    }

    fn assemble(
        config: TrainConfig,
        model: Summarizer,
        optimizer: AdamW,
        step: u64,
        docs: Vec<Document>,
        resources: Resources,
    ) -> Result<Self> {
        let docs: Vec<Document> = docs.into_iter().filter(|d| !d.is_empty()).collect();
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let indexed = docs.iter().map(|d| model.index(d, &resources.vocab)).collect();
        Ok(Self { config, model, optimizer, step, resources, docs, indexed })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn steps_per_epoch(&self) -> u64 {
        self.docs.len().div_ceil(self.config.batch_size) as u64
    }

    pub fn total_steps(&self) -> u64 {
        self.steps_per_epoch() * self.config.epochs as u64
    }

    /// Document indices of the batch at `step`; each epoch is a fresh
    /// seeded shuffle.
    pub fn batch_at(&self, step: u64) -> Vec<usize> {
        let spe = self.steps_per_epoch();
        let epoch = step / spe;
        let mut order: Vec<usize> = (0..self.docs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(rollout_seed(self.config.seed, epoch, usize::MAX - 1)));
        let start = ((step % spe) as usize) * self.config.batch_size;
        order[start..(start + self.config.batch_size).min(order.len())].to_vec()
    }

    /// Runs the next update.
    pub fn train_step(&mut self) -> Result<StepMetrics> {
        let epoch = (self.step / self.steps_per_epoch()) as usize;
        let batch_idx = self.batch_at(self.step);
        let Self { config, model, optimizer, resources, docs, indexed, step } = self;
        let batch: Vec<(&Document, &IndexedDocument)> = batch_idx.iter().map(|&i| (&docs[i], &indexed[i])).collect();
        let reward_model = resources.reward_model(config);
        let reward = |doc: &Document, s: &crate::model::SummaryCandidate| score_summary(&reward_model, doc, &s.tokens());
        let opts = StepOptions {
            step: *step,
            seed: config.seed,
            budgets: config.budgets(),
            grad_clip_norm: config.grad_clip_norm,
            with_compressor: epoch >= config.staged_extractor_epochs,
        };
        let metrics = scst_step(model, optimizer, &batch, &resources.embeddings, &reward, opts)?;
        *step += 1;
        Ok(metrics)
    }

    /// Mean greedy total reward over `docs` (the training set when `None`).
    pub fn mean_greedy_reward(&self, docs: Option<&[Document]>) -> Result<f64> {
        let docs = docs.unwrap_or(&self.docs);
        let reward_model = self.resources.reward_model(&self.config);
        let totals: Vec<f64> = docs
            .par_iter()
            .filter(|d| !d.is_empty())
            .map(|d| {
                let (_, comp) = self.model.summarize(
                    d,
                    &self.resources.vocab,
                    &self.resources.embeddings,
                    self.config.budgets(),
                    DecodeMode::Greedy,
                    0,
                )?;
                Ok(score_summary(&reward_model, d, &comp.tokens()).total)
            })
            .collect::<Result<_>>()?;
        Ok(totals.iter().sum::<f64>() / totals.len().max(1) as f64)
    }

    /// Snapshot including optimizer moments and the run configuration.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = self.model.to_checkpoint(&self.resources.vocab, &self.resources.embeddings, self.config.seed, self.step);
        for (id, name, _) in self.model.params.iter() {
            ck.arrays.push((format!("optim.m/{name}"), self.optimizer.m[id.0].clone()));
            ck.arrays.push((format!("optim.v/{name}"), self.optimizer.v[id.0].clone()));
        }
        ck.extra = serde_json::to_value(TrainExtra { train_config: self.config.clone(), optimizer_t: self.optimizer.t })
            .expect("serializable");
        ck
    }

    /// Trains until the configured epochs are done, appending metrics and
    /// writing checkpoints into `out_dir`.
    pub fn run(&mut self, out_dir: &Path) -> Result<TrainSummary> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let metrics_path = out_dir.join(METRICS_FILE);
        let checkpoint_path = out_dir.join(CHECKPOINT_FILE);
        let mut log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&metrics_path)
            .map_err(|e| Error::io(&metrics_path, e))?;
        let mut last = None;
        while self.step < self.total_steps() {
            let m = self.train_step()?;
            let line = serde_json::to_string(&m)?;
            writeln!(log, "{line}").map_err(|e| Error::io(&metrics_path, e))?;
            if self.config.checkpoint_every > 0 && self.step % self.config.checkpoint_every == 0 {
                self.checkpoint().save(&checkpoint_path)?;
            }
            last = Some(m);
        }
        self.checkpoint().save(&checkpoint_path)?;
        Ok(TrainSummary { steps: self.step, last, checkpoint: checkpoint_path, metrics: metrics_path })
    }
}

/// Where a run left its outputs.
#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub steps: u64,
    pub last: Option<StepMetrics>,
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
}

/// Loads the configured dataset (documents only) and trains from scratch.
pub fn train(config: &TrainConfig, out_dir: &Path) -> Result<TrainSummary> {
    config.validate()?;
    let data = config.data.as_ref().ok_or_else(|| Error::Config("no training data path (data)".into()))?;
    let docs = load_documents(data)?;
    let resources = Resources::build(&docs, config, Stopwords::from_env()?)?;
    Trainer::new(config.clone(), docs, resources)?.run(out_dir)
}
