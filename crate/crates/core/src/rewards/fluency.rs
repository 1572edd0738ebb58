use crate::error::{Error, Result};

use super::lm::LanguageModelHandle;

/// Syntactic log-odds ratio: `(ln P_LM(S) - ln P_U(S)) / |S|`.
pub fn slor(summary_tokens: &[&str], lm: &LanguageModelHandle) -> Result<f64> {
    if summary_tokens.is_empty() {
        return Err(Error::EmptySummary);
    }
    let lm_score = lm.scorer.log_prob(summary_tokens);
    let unigram: f64 = summary_tokens.iter().map(|t| lm.unigram.token_log_prob(t)).sum();
    Ok((lm_score - unigram) / summary_tokens.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::lm::{SequenceScorer, UnigramModel};
    use std::collections::HashMap;
    use std::sync::Arc;

    /// Maximum-likelihood bigram table fixed by hand.
    struct HandBigram(HashMap<(&'static str, &'static str), f64>);

    impl SequenceScorer for HandBigram {
        fn log_prob(&self, tokens: &[&str]) -> f64 {
            let mut prev = "<s>";
            let mut total = 0.0;
            for t in tokens {
                let key = self.0.keys().find(|(a, b)| *a == prev && b == t).copied().unwrap();
                total += self.0[&key].ln();
                prev = key.1;
            }
            total
        }
    }

    fn unigram() -> UnigramModel {
        UnigramModel::from_probs([("a", 0.4), ("b", 0.35), ("c", 0.25)], 1e-12)
    }

    #[test]
    fn unigram_scorer_gives_zero() {
        let lm = LanguageModelHandle::unigram_only(unigram());
        for s in [vec!["a"], vec!["a", "b", "c", "a"], vec!["zzz", "b"]] {
            assert!(slor(&s, &lm).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn toy_bigram_by_hand() {
        // Toy corpus: "a b", "a b", "a c", "b a", "c a b".
        // Starts: a 3/5; successors of a: b 3/4, c 1/4.
        let lm = LanguageModelHandle::new(
            Arc::new(HandBigram(HashMap::from([(("<s>", "a"), 3.0 / 5.0), (("a", "b"), 3.0 / 4.0)]))),
            Arc::new(unigram()),
        );
        let expected = ((0.6f64).ln() + (0.75f64).ln() - (0.4f64).ln() - (0.35f64).ln()) / 2.0;
        assert!((slor(&["a", "b"], &lm).unwrap() - expected).abs() < 1e-9);
        // 0.5 * ln(0.45 / 0.14)
        assert!((expected - 0.5 * (0.45f64 / 0.14).ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_summary_rejected() {
        let lm = LanguageModelHandle::unigram_only(unigram());
        assert!(matches!(slor(&[], &lm), Err(Error::EmptySummary)));
    }

    #[test]
    fn neutral_token_keeps_per_token_average() {
        // appending a token whose LM conditional equals its unigram
        // probability scales the SLOR by |S| / (|S| + 1)
        struct Fixed;
        impl SequenceScorer for Fixed {
            fn log_prob(&self, tokens: &[&str]) -> f64 {
                tokens
                    .iter()
                    .map(|t| match *t {
                        "a" => 0.9f64.ln(),
                        "b" => 0.8f64.ln(),
                        _ => 0.25f64.ln(),
                    })
                    .sum()
            }
        }
        let lm = LanguageModelHandle::new(Arc::new(Fixed), Arc::new(unigram()));
        let base = slor(&["a", "b"], &lm).unwrap();
        let extended = slor(&["a", "b", "c"], &lm).unwrap();
        assert!((extended - base * 2.0 / 3.0).abs() < 1e-12);
    }
}
