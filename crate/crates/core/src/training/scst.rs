//! Self-critical policy gradient: the greedy rollout is the baseline for the
//! sampled one, and both agents share the reward difference.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, EmbeddingTable, IndexedDocument};
use crate::error::Result;
use crate::model::{Budgets, Policy, Summarizer, SummaryCandidate};
use crate::nn::{Graph, Var};
use crate::rewards::RewardBreakdown;

use super::optim::{clip_grad_norm, AdamW, ParamGrads};

/// Reward of a compressive summary of a document. Evaluated outside the
/// graph, so it is a constant for differentiation.
pub trait RewardFn: Sync {
    fn reward(&self, doc: &Document, summary: &SummaryCandidate) -> RewardBreakdown;
}

impl<F> RewardFn for F
where
    F: Fn(&Document, &SummaryCandidate) -> RewardBreakdown + Sync,
{
    fn reward(&self, doc: &Document, summary: &SummaryCandidate) -> RewardBreakdown {
        self(doc, summary)
    }
}

/// Sampled and greedy pointer sequences of one document.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollouts {
    pub sampled_sentences: Vec<usize>,
    pub sampled_words: Vec<usize>,
    pub greedy: SummaryCandidate,
    pub sampled: SummaryCandidate,
}

/// Per-document loss and gradient.
#[derive(Clone, Debug)]
pub struct DocOutcome {
    pub loss: f64,
    pub grads: ParamGrads,
    pub sampled: RewardBreakdown,
    pub baseline: RewardBreakdown,
    pub rollouts: Rollouts,
}

/// Mean log-probability of the extractor steps plus that of the compressor
/// steps (the latter omitted when `with_compressor` is false).
pub fn policy_log_prob(g: &mut Graph<'_>, ext: &[Var], comp: &[Var], with_compressor: bool) -> Var {
    let e = g.add_all(ext);
    let mut total = g.scale(e, 1.0 / ext.len() as f64);
    if with_compressor {
        let c = g.add_all(comp);
        let c = g.scale(c, 1.0 / comp.len() as f64);
        total = g.add(total, c);
    }
    total
}

/// Greedy baseline, one sampled rollout, and the gradient of
/// `-(R(sampled) - R(greedy)) · log p(sampled)`.
#[allow(clippy::too_many_arguments)]
pub fn doc_outcome(
    model: &Summarizer,
    doc: &Document,
    idoc: &IndexedDocument,
    embeddings: &EmbeddingTable,
    budgets: Budgets,
    reward: &dyn RewardFn,
    rng: &mut dyn RngCore,
    with_compressor: bool,
) -> Result<DocOutcome> {
    let greedy = {
        let mut g = Graph::new();
        let table = g.input(embeddings.matrix(), false);
        model.rollout(&mut g, doc, idoc, table, budgets, Policy::Greedy)?.compressive
    };
    let baseline = reward.reward(doc, &greedy);

    let mut g = Graph::new();
    let table = g.input(embeddings.matrix(), false);
    let r = model.rollout(&mut g, doc, idoc, table, budgets, Policy::Sample(rng))?;
    let sampled = reward.reward(doc, &r.compressive);
    let advantage = sampled.total - baseline.total;
    let log_prob = policy_log_prob(&mut g, &r.extract_log_probs, &r.compress_log_probs, with_compressor);
    let loss = g.scale(log_prob, -advantage);
    let grads = if advantage != 0.0 { g.param_gradients(&g.backward(loss)) } else { ParamGrads::new() };
    Ok(DocOutcome {
        loss: g.scalar(loss),
        grads,
        sampled,
        baseline,
        rollouts: Rollouts {
            sampled_sentences: r.extractive.pointers.indices.clone(),
            sampled_words: r.compressive.pointers.indices.clone(),
            greedy,
            sampled: r.compressive,
        },
    })
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub loss: f64,
    pub r_sampled: f64,
    pub r_baseline: f64,
    pub cov: f64,
    pub flu: f64,
    /// The update was not applied (zero advantage or non-finite loss).
    pub skipped: bool,
}

/// Knobs of a single update.
#[derive(Clone, Copy, Debug)]
pub struct StepOptions {
    pub step: u64,
    pub seed: u64,
    pub budgets: Budgets,
    pub grad_clip_norm: f64,
    pub with_compressor: bool,
}

/// Seed of the sampling stream for document `doc` of step `step`.
pub fn rollout_seed(seed: u64, step: u64, doc: usize) -> u64 {
    let mut x = seed ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (doc as u64 + 1).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finaliser
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476C_E5B9_CE1D);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Computes the batch loss, clips, and applies one optimizer update. Rollouts
/// run in parallel; the update is applied once, after all of them.
pub fn scst_step(
    model: &mut Summarizer,
    optimizer: &mut AdamW,
    batch: &[(&Document, &IndexedDocument)],
    embeddings: &EmbeddingTable,
    reward: &dyn RewardFn,
    opts: StepOptions,
) -> Result<StepMetrics> {
    assert!(!batch.is_empty(), "empty batch");
    let outcomes: Vec<DocOutcome> = {
        let model = &*model;
        batch
            .par_iter()
            .enumerate()
            .map(|(i, (doc, idoc))| {
                let mut rng = ChaCha8Rng::seed_from_u64(rollout_seed(opts.seed, opts.step, i));
                doc_outcome(model, doc, idoc, embeddings, opts.budgets, reward, &mut rng, opts.with_compressor)
            })
            .collect::<Result<_>>()?
    };
    let n = outcomes.len() as f64;
    let mean = |f: &dyn Fn(&DocOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / n;
    let mut metrics = StepMetrics {
        step: opts.step,
        loss: mean(&|o| o.loss),
        r_sampled: mean(&|o| o.sampled.total),
        r_baseline: mean(&|o| o.baseline.total),
        cov: mean(&|o| o.sampled.coverage),
        flu: mean(&|o| o.sampled.fluency),
        skipped: false,
    };

    if outcomes.iter().all(|o| o.grads.is_empty()) {
        metrics.skipped = true;
        return Ok(metrics);
    }
    let mut grads = ParamGrads::new();
    for o in outcomes {
        for (id, g) in o.grads {
            let g = g / n;
            grads.entry(id).and_modify(|acc| *acc += &g).or_insert(g);
        }
    }
    let finite = metrics.loss.is_finite() && grads.values().all(|g| g.iter().all(|x| x.is_finite()));
    if !finite {
        log::warn!("step {}: non-finite loss or gradient, update skipped", opts.step);
        metrics.skipped = true;
        return Ok(metrics);
    }
    clip_grad_norm(&mut grads, opts.grad_clip_norm);
    optimizer.step(&mut model.params, &grads);
    Ok(metrics)
}
