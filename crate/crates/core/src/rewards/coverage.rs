use ndarray::Array2;
use serde::Serialize;

use crate::corpus::{EmbeddingTable, Stopwords, Vocab};
use crate::error::Result;

use super::cost::cost_matrix;
use super::ot::{solve, OtSolver, SolverMeta};
use super::tf::{tf_distribution, TfDistribution};

/// Everything the coverage reward reads.
#[derive(Clone, Copy, Debug)]
pub struct CoverageContext<'a> {
    pub vocab: &'a Vocab,
    pub embeddings: &'a EmbeddingTable,
    pub stopwords: &'a Stopwords,
    pub solver: OtSolver,
}

/// Optimal transport between a document's and a summary's term frequencies,
/// kept whole for inspection.
#[derive(Clone, Debug, Serialize)]
pub struct TransportPlan {
    pub doc_tokens: Vec<String>,
    pub sum_tokens: Vec<String>,
    pub doc_weights: Vec<f64>,
    pub sum_weights: Vec<f64>,
    #[serde(skip)]
    pub cost: Array2<f64>,
    #[serde(skip)]
    pub plan: Array2<f64>,
    pub distance: f64,
    pub solver_meta: SolverMeta,
}

impl TransportPlan {
    /// Builds the plan between two TF distributions.
    pub fn between(doc: &TfDistribution, summary: &TfDistribution, ctx: &CoverageContext<'_>) -> Self {
        let cost = cost_matrix(&doc.support, &summary.support, ctx.embeddings);
        let solution = solve(&doc.weights, &summary.weights, &cost, &ctx.solver);
        let labels = |d: &TfDistribution| d.support.iter().map(|&id| ctx.vocab.token(id).to_string()).collect();
        Self {
            doc_tokens: labels(doc),
            sum_tokens: labels(summary),
            doc_weights: doc.weights.clone(),
            sum_weights: summary.weights.clone(),
            cost,
            plan: solution.plan,
            distance: solution.distance,
            solver_meta: solution.meta,
        }
    }
}

/// Transport plan from the document's TF distribution to the summary's.
pub fn coverage_plan(doc_tokens: &[&str], summary_tokens: &[&str], ctx: &CoverageContext<'_>) -> Result<TransportPlan> {
    let doc = tf_distribution(&ctx.vocab.encode(doc_tokens.iter().copied()), ctx.stopwords, ctx.vocab)?;
    let summary = tf_distribution(&ctx.vocab.encode(summary_tokens.iter().copied()), ctx.stopwords, ctx.vocab)?;
    Ok(TransportPlan::between(&doc, &summary, ctx))
}

/// `1 - d_W(TF_doc, TF_summary)`. A side with no countable token makes the
/// summary degenerate and scores 0.
pub fn coverage_reward(doc_tokens: &[&str], summary_tokens: &[&str], ctx: &CoverageContext<'_>) -> f64 {
    match coverage_plan(doc_tokens, summary_tokens, ctx) {
        Ok(plan) => 1.0 - plan.distance,
        Err(e) => {
            log::warn!("coverage reward set to 0: {e}");
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn fixture() -> (Vocab, EmbeddingTable, Stopwords) {
        let vocab = Vocab::from_tokens(["country", "debt", "loans", "bankruptcy", "the"]);
        let emb = EmbeddingTable::from_matrix(array![
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.1],
            [0.0, 1.0, 0.0],
            [0.0, 0.9, 0.3],
            [0.3, 0.3, 0.3],
        ])
        .unwrap();
        (vocab, emb, ["the"].into_iter().collect())
    }

    #[test]
    fn summary_equal_to_document_scores_one() {
        let (vocab, emb, stop) = fixture();
        let ctx = CoverageContext { vocab: &vocab, embeddings: &emb, stopwords: &stop, solver: OtSolver::default() };
        let doc = ["the", "country", "debt", "debt", "loans"];
        // entropic smoothing leaves a small residual; the exact solver has none
        let r = coverage_reward(&doc, &doc, &ctx);
        assert!((r - 1.0).abs() < 1e-3, "{r}");
        let exact = CoverageContext { solver: OtSolver::Exact, ..ctx };
        assert!((coverage_reward(&doc, &doc, &exact) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_orthogonal_supports_score_zero() {
        let (vocab, _, stop) = fixture();
        let emb = EmbeddingTable::from_matrix(array![
            [0.0, 0.0],
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [1.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
        ])
        .unwrap();
        let ctx = CoverageContext { vocab: &vocab, embeddings: &emb, stopwords: &stop, solver: OtSolver::Exact };
        assert!(coverage_reward(&["country"], &["debt"], &ctx).abs() < 1e-12);
    }

    #[test]
    fn degenerate_summary_scores_zero() {
        let (vocab, emb, stop) = fixture();
        let ctx = CoverageContext { vocab: &vocab, embeddings: &emb, stopwords: &stop, solver: OtSolver::default() };
        assert_eq!(coverage_reward(&["country"], &["the", "the"], &ctx), 0.0);
    }

    #[test]
    fn doc_only_token_moves_to_cheapest_summary_token() {
        let (vocab, emb, stop) = fixture();
        let ctx = CoverageContext { vocab: &vocab, embeddings: &emb, stopwords: &stop, solver: OtSolver::Exact };
        let plan = coverage_plan(&["country", "debt"], &["country", "loans", "bankruptcy"], &ctx).unwrap();
        let debt = plan.doc_tokens.iter().position(|t| t == "debt").unwrap();
        let row = plan.plan.row(debt);
        let best = (0..plan.sum_tokens.len())
            .min_by(|&a, &b| plan.cost[[debt, a]].total_cmp(&plan.cost[[debt, b]]))
            .unwrap();
        assert_eq!(plan.sum_tokens[best], "loans");
        assert!(row[best] > 0.0);
        assert!((row.sum() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bounded_by_max_cost() {
        let (vocab, emb, stop) = fixture();
        let ctx = CoverageContext { vocab: &vocab, embeddings: &emb, stopwords: &stop, solver: OtSolver::default() };
        let plan = coverage_plan(&["country", "debt", "loans"], &["bankruptcy"], &ctx).unwrap();
        let max_cost = plan.cost.iter().copied().fold(0.0, f64::max);
        let r = 1.0 - plan.distance;
        assert!(r <= 1.0 + 1e-12 && r >= 1.0 - max_cost - 1e-12);
    }
}
