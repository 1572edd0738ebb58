use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// F-measures on a 0–100 scale.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    pub rouge1_f: f64,
    pub rouge2_f: f64,
    #[serde(rename = "rougeL_f")]
    pub rouge_l_f: f64,
}

impl RougeScores {
    pub fn mean<'a>(scores: impl IntoIterator<Item = &'a RougeScores>) -> RougeScores {
        let mut sum = RougeScores::default();
        let mut n = 0.0;
        for s in scores {
            sum.rouge1_f += s.rouge1_f;
            sum.rouge2_f += s.rouge2_f;
            sum.rouge_l_f += s.rouge_l_f;
            n += 1.0;
        }
        if n > 0.0 {
            sum.rouge1_f /= n;
            sum.rouge2_f /= n;
            sum.rouge_l_f /= n;
        }
        sum
    }
}

/// Precision, recall and F1 as fractions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(hits: usize, hyp_len: usize, ref_len: usize) -> Self {
        if hits == 0 || hyp_len == 0 || ref_len == 0 {
            return Self { precision: 0.0, recall: 0.0, f1: 0.0 };
        }
        let p = hits as f64 / hyp_len as f64;
        let r = hits as f64 / ref_len as f64;
        Self { precision: p, recall: r, f1: 2.0 * p * r / (p + r) }
    }
}

fn ngram_counts<'a>(tokens: &'a [String], n: usize) -> HashMap<&'a [String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram overlap.
pub fn rouge_n(hyp: &[String], reference: &[String], n: usize) -> Prf {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let hits = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
    Prf::from_counts(hits, hyp.len().saturating_sub(n - 1), reference.len().saturating_sub(n - 1))
}

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// LCS-based F-measure over the whole summary as one sequence.
pub fn rouge_l(hyp: &[String], reference: &[String]) -> Prf {
    Prf::from_counts(lcs_len(hyp, reference), hyp.len(), reference.len())
}

/// ROUGE-1, ROUGE-2 and ROUGE-L F1. Tokens are lowercased; punctuation
/// tokens count like words; no stemming or stopword removal.
pub fn rouge<S: AsRef<str>>(hypothesis: &[S], reference: &[S]) -> Result<RougeScores> {
    if reference.is_empty() {
        return Err(Error::InvalidArgument("reference summary is empty".into()));
    }
    let lower = |xs: &[S]| xs.iter().map(|t| t.as_ref().to_lowercase()).collect::<Vec<_>>();
    let (h, r) = (lower(hypothesis), lower(reference));
    Ok(RougeScores {
        rouge1_f: 100.0 * rouge_n(&h, &r, 1).f1,
        rouge2_f: 100.0 * rouge_n(&h, &r, 2).f1,
        rouge_l_f: 100.0 * rouge_l(&h, &r).f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    /// Exhaustive LCS: try every subsequence of `a`.
    fn brute_lcs(a: &[String], b: &[String]) -> usize {
        fn is_subseq(s: &[&String], b: &[String]) -> bool {
            let mut it = b.iter();
            s.iter().all(|x| it.any(|y| y == *x))
        }
        (0u32..1 << a.len())
            .filter_map(|mask| {
                let s: Vec<&String> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| &a[i]).collect();
                is_subseq(&s, b).then_some(s.len())
            })
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn identical_and_disjoint() {
        let r = rouge(&toks("the cat sat on the mat"), &toks("the cat sat on the mat")).unwrap();
        assert_eq!((r.rouge1_f, r.rouge2_f, r.rouge_l_f), (100.0, 100.0, 100.0));
        let r = rouge(&toks("dogs bark"), &toks("the cat sat")).unwrap();
        assert_eq!((r.rouge1_f, r.rouge2_f, r.rouge_l_f), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_computed_unigram() {
        // P = 2/3, R = 1 → F = 0.8
        let r = rouge(&toks("the cat sat"), &toks("the cat")).unwrap();
        assert!((r.rouge1_f - 80.0).abs() < 1e-9);
        let p = rouge_n(&toks("the cat sat"), &toks("the cat"), 1);
        assert!((p.precision - 2.0 / 3.0).abs() < 1e-12 && p.recall == 1.0);
    }

    #[test]
    fn clipping_and_case() {
        // hypothesis repeats "the" three times; the reference has it twice
        let p = rouge_n(&toks("the the the"), &toks("the cat the"), 1);
        assert!((p.precision - 2.0 / 3.0).abs() < 1e-12);
        let r = rouge(&toks("The Cat"), &toks("the cat")).unwrap();
        assert_eq!(r.rouge1_f, 100.0);
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(rouge::<&str>(&[], &["a"]).unwrap(), RougeScores::default());
        assert!(rouge(&["a"], &[]).is_err());
    }

    #[test]
    fn containing_the_reference_gives_full_recall() {
        let reference = toks("markets fell on monday");
        let hyp = toks("as expected markets fell on monday after the news");
        assert_eq!(rouge_n(&hyp, &reference, 1).recall, 1.0);
    }

    proptest! {
        #[test]
        fn lcs_matches_exhaustive_search(
            a in proptest::collection::vec(0u8..4, 0..9),
            b in proptest::collection::vec(0u8..4, 0..9),
        ) {
            let a: Vec<String> = a.iter().map(|x| x.to_string()).collect();
            let b: Vec<String> = b.iter().map(|x| x.to_string()).collect();
            prop_assert_eq!(lcs_len(&a, &b), brute_lcs(&a, &b));
        }

        #[test]
        fn scores_bounded_and_symmetric_f(
            a in proptest::collection::vec(0u8..5, 1..12),
            b in proptest::collection::vec(0u8..5, 1..12),
        ) {
            let a: Vec<String> = a.iter().map(|x| x.to_string()).collect();
            let b: Vec<String> = b.iter().map(|x| x.to_string()).collect();
            let ab = rouge(&a, &b).unwrap();
            let ba = rouge(&b, &a).unwrap();
            for v in [ab.rouge1_f, ab.rouge2_f, ab.rouge_l_f] {
                prop_assert!((0.0..=100.0).contains(&v));
            }
            prop_assert!((ab.rouge1_f - ba.rouge1_f).abs() < 1e-9);
            prop_assert!((ab.rouge_l_f - ba.rouge_l_f).abs() < 1e-9);
        }
    }
}
