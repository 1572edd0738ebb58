use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

/// Environment variable that overrides the bundled stopword list.
pub const STOPWORDS_ENV: &str = "URLCOMSUM_STOPWORDS";

const DEFAULT_LIST: &str = include_str!("../../data/stopwords.txt");

/// Tokens excluded from term-frequency distributions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Default for Stopwords {
    fn default() -> Self {
        Self::parse(DEFAULT_LIST)
    }
}

impl Stopwords {
    pub fn empty() -> Self {
        Self(HashSet::new())
    }

    /// One token per line; blank lines and lines starting with `# ` are skipped.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("# "))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    /// The file named by `URLCOMSUM_STOPWORDS` if set, else the bundled list.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(STOPWORDS_ENV) {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}
