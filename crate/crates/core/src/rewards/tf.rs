use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Stopwords, Vocab};
use crate::error::{Error, Result};

/// Normalised term frequencies over non-stopword vocabulary ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfDistribution {
    /// Distinct token ids in ascending order.
    pub support: Vec<usize>,
    /// Probability mass aligned with `support`; sums to one.
    pub weights: Vec<f64>,
}

impl TfDistribution {
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn weight_of(&self, id: usize) -> Option<f64> {
        self.support
            .binary_search(&id)
            .ok()
            .map(|k| self.weights[k])
    }
}

/// Counts the ids that are neither special nor stopwords and normalises.
pub fn tf_distribution(tokens: &[usize], stopwords: &Stopwords, vocab: &Vocab) -> Result<TfDistribution> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &id in tokens {
        if Vocab::is_special(id) || stopwords.contains(vocab.token(id)) {
            continue;
        }
        *counts.entry(id).or_default() += 1;
    }
    let total: usize = counts.values().sum();
    if total == 0 {
        return Err(Error::EmptyDistribution);
    }
    let (support, weights) = counts
        .into_iter()
        .map(|(id, c)| (id, c as f64 / total as f64))
        .unzip();
    Ok(TfDistribution { support, weights })
}
