use serde::{Deserialize, Serialize};

/// A source text together with its sentence and token segmentation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    /// Lowercased tokens, one list per sentence, in reading order.
    pub sentences: Vec<Vec<String>>,
    /// Reference summary. Only the evaluation loader fills this in.
    pub source_summary: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        let raw_text = raw_text.into();
        let sentences = split_sentences(&raw_text)
            .into_iter()
            .map(tokenize)
            .filter(|s| !s.is_empty())
            .collect();
        Self {
            id: id.into(),
            raw_text,
            sentences,
            source_summary: None,
        }
    }

    pub fn with_summary(mut self, summary: impl Into<String>) -> Self {
        self.source_summary = Some(summary.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn num_sentences(&self) -> usize {
        self.sentences.len()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    /// All tokens in document order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }

    /// Position of the first token of every sentence in the flattened token list.
    pub fn sentence_offsets(&self) -> Vec<usize> {
        self.sentences
            .iter()
            .scan(0, |acc, s| {
                let start = *acc;
                *acc += s.len();
                Some(start)
            })
            .collect()
    }
}

/// Segments `raw_text` into a [`Document`] with an empty id.
pub fn segment_document(raw_text: &str) -> Document {
    Document::new("", raw_text)
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits after `.`, `!` or `?` when followed by whitespace and an uppercase
/// letter, or by the end of the text.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    for (k, &(pos, c)) in chars.iter().enumerate() {
        if !is_terminal(c) {
            continue;
        }
        let end = pos + c.len_utf8();
        let rest = &chars[k + 1..];
        let boundary = match rest.first() {
            None => true,
            Some(&(_, next)) if next.is_whitespace() => {
                match rest.iter().find(|(_, ch)| !ch.is_whitespace()) {
                    None => true,
                    Some(&(_, ch)) => ch.is_uppercase(),
                }
            }
            _ => false,
        };
        if boundary {
            out.push(&text[start..end]);
            start = end;
        }
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out.retain(|s| !s.trim().is_empty());
    out
}

/// Whitespace tokenisation with leading and trailing punctuation split off as
/// single-character tokens. Inner punctuation ("don't", "3.5") stays attached.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let lead = chars.iter().take_while(|c| !c.is_alphanumeric()).count();
        if lead == chars.len() {
            out.extend(chars.iter().map(|c| c.to_lowercase().collect::<String>()));
            continue;
        }
        let trail = chars.iter().rev().take_while(|c| !c.is_alphanumeric()).count();
        out.extend(chars[..lead].iter().map(|c| c.to_string()));
        out.push(chars[lead..chars.len() - trail].iter().collect::<String>().to_lowercase());
        out.extend(chars[chars.len() - trail..].iter().map(|c| c.to_string()));
    }
    out
}
