use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture hyperparameters shared by both agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    /// Hidden size per LSTM direction.
    pub hidden: usize,
    /// Stacked bidirectional layers in the first recurrent block of each level.
    pub layers: usize,
    pub heads: usize,
    pub max_sentences: usize,
    pub max_words: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { embedding_dim: 300, hidden: 150, layers: 3, heads: 4, max_sentences: 40, max_words: 50 }
    }
}

impl ModelConfig {
    /// Width of every position representation the encoders emit.
    pub fn rep_width(&self) -> usize {
        2 * self.hidden
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("embedding_dim", self.embedding_dim),
            ("hidden", self.hidden),
            ("layers", self.layers),
            ("heads", self.heads),
            ("max_sentences", self.max_sentences),
            ("max_words", self.max_words),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.rep_width() % self.heads != 0 {
            return Err(Error::Config(format!(
                "heads ({}) must divide the representation width ({})",
                self.heads,
                self.rep_width()
            )));
        }
        Ok(())
    }
}

/// Selection budgets: sentences for the extractor, words for the compressor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub sentences: usize,
    pub words: usize,
}

impl Budgets {
    pub fn validate(&self) -> Result<()> {
        if self.sentences == 0 || self.words == 0 {
            return Err(Error::Config("budgets must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-dataset budgets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Cnndm,
    Newsroom,
    Xsum,
}

impl Profile {
    pub const ALL: [Profile; 3] = [Profile::Cnndm, Profile::Newsroom, Profile::Xsum];

    pub fn budgets(self) -> Budgets {
        match self {
            Profile::Cnndm => Budgets { sentences: 3, words: 58 },
            Profile::Newsroom => Budgets { sentences: 2, words: 26 },
            Profile::Xsum => Budgets { sentences: 2, words: 24 },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Cnndm => "cnndm",
            Profile::Newsroom => "newsroom",
            Profile::Xsum => "xsum",
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown profile {s:?} (cnndm, newsroom, xsum)")))
    }
}
