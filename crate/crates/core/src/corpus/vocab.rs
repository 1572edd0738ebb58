use std::collections::HashMap;

use crate::error::{Error, Result};

use super::Document;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";

/// Token index space shared by the agents and the rewards.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub const PAD_ID: usize = 0;
    pub const UNK_ID: usize = 1;

    /// Builds a vocabulary from an explicit token list (specials are prepended).
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self {
            tokens: vec![PAD.to_string(), UNK.to_string()],
            index: HashMap::new(),
        };
        vocab.index.insert(PAD.to_string(), Self::PAD_ID);
        vocab.index.insert(UNK.to_string(), Self::UNK_ID);
        for t in tokens {
            let t = t.into();
            if !vocab.index.contains_key(&t) {
                vocab.index.insert(t.clone(), vocab.tokens.len());
                vocab.tokens.push(t);
            }
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    /// Id of `token`, or [`Vocab::UNK_ID`].
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_special(id: usize) -> bool {
        id == Self::PAD_ID || id == Self::UNK_ID
    }

    pub fn encode<'t>(&self, tokens: impl IntoIterator<Item = &'t str>) -> Vec<usize> {
        tokens.into_iter().map(|t| self.id(t)).collect()
    }
}

/// Keeps every token seen at least `min_count` times, ordered by descending
/// frequency and then lexicographically.
pub fn build_vocab<'d>(
    corpus: impl IntoIterator<Item = &'d Document>,
    min_count: usize,
) -> Result<Vocab> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut seen_docs = 0;
    for doc in corpus {
        seen_docs += 1;
        for t in doc.tokens() {
            *counts.entry(t).or_default() += 1;
        }
    }
    if seen_docs == 0 || counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut entries: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count.max(1))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(Vocab::from_tokens(entries.into_iter().map(|(t, _)| t)))
}
