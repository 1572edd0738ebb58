use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Document, Vocab};

/// Fixed-shape id grid consumed by the agents.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexedDocument {
    /// `max_sentences × max_words` token ids; padding carries [`Vocab::PAD_ID`].
    pub ids: Array2<usize>,
    pub sentence_mask: Vec<bool>,
    pub word_mask: Array2<bool>,
    pub sentence_count: usize,
    /// Real words per sentence slot (0 for padded slots).
    pub word_counts: Vec<usize>,
    pub stats: TruncationStats,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationStats {
    /// Sentences dropped past `max_sentences`.
    pub truncated: usize,
    /// Words dropped past `max_words` in the kept sentences.
    pub truncated_words: usize,
}

impl IndexedDocument {
    pub fn max_sentences(&self) -> usize {
        self.ids.nrows()
    }

    pub fn max_words(&self) -> usize {
        self.ids.ncols()
    }

    /// Real ids of sentence `i`.
    pub fn sentence_ids(&self, i: usize) -> &[usize] {
        let row = self.ids.row(i);
        &row.to_slice().expect("row-major ids")[..self.word_counts[i]]
    }
}

/// Truncates and pads `doc` to `max_sentences × max_words`.
pub fn pad_and_index(
    doc: &Document,
    vocab: &Vocab,
    max_sentences: usize,
    max_words: usize,
) -> IndexedDocument {
    assert!(max_sentences >= 1 && max_words >= 1, "grid dimensions must be positive");
    let mut ids = Array2::from_elem((max_sentences, max_words), Vocab::PAD_ID);
    let mut word_mask = Array2::from_elem((max_sentences, max_words), false);
    let mut sentence_mask = vec![false; max_sentences];
    let mut word_counts = vec![0; max_sentences];
    let mut stats = TruncationStats {
        truncated: doc.sentences.len().saturating_sub(max_sentences),
        truncated_words: 0,
    };
    for (i, sentence) in doc.sentences.iter().take(max_sentences).enumerate() {
        sentence_mask[i] = true;
        stats.truncated_words += sentence.len().saturating_sub(max_words);
        for (j, token) in sentence.iter().take(max_words).enumerate() {
            ids[[i, j]] = vocab.id(token);
            word_mask[[i, j]] = true;
        }
        word_counts[i] = sentence.len().min(max_words);
    }
    IndexedDocument {
        ids,
        sentence_mask,
        word_mask,
        sentence_count: doc.sentences.len().min(max_sentences),
        word_counts,
        stats,
    }
}
