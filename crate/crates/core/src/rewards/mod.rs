//! Unsupervised rewards: semantic coverage through optimal transport over
//! term frequencies, and fluency through SLOR under a trigram language model.

pub mod cost;
pub mod coverage;
pub mod export;
pub mod fluency;
pub mod lm;
pub mod ot;
pub mod tf;

use serde::{Deserialize, Serialize};

pub use coverage::{coverage_plan, coverage_reward, CoverageContext, TransportPlan};
pub use export::{export_plan, plan_to_tsv, read_plan_tsv, ExportedPlan, PlanMatrix};
pub use fluency::slor;
pub use lm::{KneserNeyLm, LanguageModelHandle, SequenceScorer, UnigramModel, LOG_PROB_FLOOR};
pub use ot::{solve, OtSolution, OtSolver, SinkhornConfig, SolverKind, SolverMeta};
pub use tf::{tf_distribution, TfDistribution};

/// Mixing weights of the two rewards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub coverage: f64,
    pub fluency: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { coverage: 1.0, fluency: 2.0 }
    }
}

/// Both reward terms and their weighted sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub coverage: f64,
    pub fluency: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn new(coverage: f64, fluency: f64, weights: RewardWeights) -> Self {
        Self { coverage, fluency, total: weights.coverage * coverage + weights.fluency * fluency }
    }
}

/// Scores summaries against their source documents.
#[derive(Clone, Copy, Debug)]
pub struct RewardModel<'a> {
    pub coverage: CoverageContext<'a>,
    pub lm: &'a LanguageModelHandle,
    pub weights: RewardWeights,
}

impl RewardModel<'_> {
    /// Full reward of a summary. An empty summary earns nothing.
    pub fn score(&self, doc_tokens: &[&str], summary_tokens: &[&str]) -> RewardBreakdown {
        if summary_tokens.is_empty() {
            return RewardBreakdown::new(0.0, 0.0, self.weights);
        }
        let cov = coverage_reward(doc_tokens, summary_tokens, &self.coverage);
        let flu = slor(summary_tokens, self.lm).unwrap_or(0.0);
        RewardBreakdown::new(cov, flu, self.weights)
    }
}
