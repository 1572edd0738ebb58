//! Small synthetic corpus with topic-structured word vectors, used by the
//! tests and the training-trend check. Each document is mostly about one
//! topic, with a few off-topic sentences mixed in at random positions.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{build_vocab, Document, EmbeddingTable, Vocab};

struct Topic {
    nouns: &'static [&'static str],
    verbs: &'static [&'static str],
    adjectives: &'static [&'static str],
}

const TOPICS: [Topic; 4] = [
    Topic {
        nouns: &["bank", "debt", "market", "loan", "investor", "bond", "currency", "budget"],
        verbs: &["borrowed", "repaid", "invested", "traded", "defaulted", "lent"],
        adjectives: &["fiscal", "volatile", "solvent", "indebted"],
    },
    Topic {
        nouns: &["team", "coach", "match", "goal", "striker", "league", "season", "stadium"],
        verbs: &["scored", "defended", "won", "lost", "trained", "tackled"],
        adjectives: &["unbeaten", "injured", "relegated", "dominant"],
    },
    Topic {
        nouns: &["storm", "rain", "wind", "flood", "forecast", "temperature", "coast", "cloud"],
        verbs: &["battered", "soaked", "flooded", "cooled", "drifted", "warned"],
        adjectives: &["humid", "freezing", "stormy", "tropical"],
    },
    Topic {
        nouns: &["hospital", "patient", "doctor", "vaccine", "virus", "clinic", "nurse", "trial"],
        verbs: &["treated", "diagnosed", "vaccinated", "recovered", "tested", "admitted"],
        adjectives: &["chronic", "infectious", "clinical", "immune"],
    },
];

const TEMPLATES: [&str; 5] = [
    "The {A} {N} {V} the {N} .",
    "A {N} {V} {N} on Monday .",
    "Officials said the {N} {V} the {A} {N} .",
    "The {N} and the {N} {V} again .",
    "Reports show the {A} {N} {V} a {N} .",
];

/// Generated documents plus matching vocabulary and embeddings.
pub struct ToyCorpus {
    pub docs: Vec<Document>,
    /// Main topic of each document.
    pub topics: Vec<usize>,
    pub vocab: Vocab,
    pub embeddings: EmbeddingTable,
}

fn fill(template: &str, topic: &Topic, rng: &mut ChaCha8Rng) -> String {
    let mut words = Vec::new();
    for part in template.split(' ') {
        let w = match part {
            "{N}" => *topic.nouns.choose(rng).expect("nouns"),
            "{V}" => *topic.verbs.choose(rng).expect("verbs"),
            "{A}" => *topic.adjectives.choose(rng).expect("adjectives"),
            other => other,
        };
        words.push(w);
    }
    let mut s = words.join(" ");
    s = s.replace(" .", ".");
    s
}

/// `n_docs` documents of 5–8 sentences; 1–2 sentences per document come from
/// another topic.
pub fn toy_corpus(n_docs: usize, embedding_dim: usize, seed: u64) -> ToyCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(n_docs);
    let mut topics = Vec::with_capacity(n_docs);
    for d in 0..n_docs {
        let topic = rng.gen_range(0..TOPICS.len());
        let n_sent = rng.gen_range(5..=8);
        let n_off = rng.gen_range(1..=2);
        let mut sentences: Vec<String> = (0..n_sent - n_off)
            .map(|_| fill(TEMPLATES.choose(&mut rng).expect("templates"), &TOPICS[topic], &mut rng))
            .collect();
        for _ in 0..n_off {
            let other = (topic + rng.gen_range(1..TOPICS.len())) % TOPICS.len();
            let s = fill(TEMPLATES.choose(&mut rng).expect("templates"), &TOPICS[other], &mut rng);
            let at = rng.gen_range(0..=sentences.len());
            sentences.insert(at, s);
        }
        let text = sentences.join(" ");
        docs.push(Document::new(format!("toy-{d}"), capitalize_sentences(&text)));
        topics.push(topic);
    }
    let vocab = build_vocab(docs.iter(), 1).expect("non-empty corpus");
    let embeddings = topic_embeddings(&vocab, embedding_dim, &mut rng);
    ToyCorpus { docs, topics, vocab, embeddings }
}

fn capitalize_sentences(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut upper = true;
    for c in text.chars() {
        if upper && c.is_alphabetic() {
            out.extend(c.to_uppercase());
            upper = false;
        } else {
            out.push(c);
        }
        if c == '.' {
            upper = true;
        }
    }
    out
}

/// Topic words cluster around a per-topic direction; everything else is
/// small isotropic noise.
fn topic_embeddings(vocab: &Vocab, dim: usize, rng: &mut ChaCha8Rng) -> EmbeddingTable {
    let centers: Vec<Vec<f64>> =
        (0..TOPICS.len()).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut m = Array2::zeros((vocab.len(), dim));
    for (id, token) in vocab.tokens().iter().enumerate().skip(2) {
        let topic = TOPICS.iter().position(|t| {
            t.nouns.contains(&token.as_str()) || t.verbs.contains(&token.as_str()) || t.adjectives.contains(&token.as_str())
        });
        for c in 0..dim {
            let noise = rng.gen_range(-0.3..0.3);
            m[[id, c]] = match topic {
                Some(t) => centers[t][c] + noise,
                None => noise,
            };
        }
    }
    EmbeddingTable::from_matrix(m).expect("pad row present")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_and_well_formed() {
        let a = toy_corpus(10, 8, 1);
        let b = toy_corpus(10, 8, 1);
        assert_eq!(a.docs, b.docs);
        for d in &a.docs {
            assert!((5..=8).contains(&d.num_sentences()), "{}", d.raw_text);
        }
        assert_eq!(a.embeddings.vocab_size(), a.vocab.len());
    }
}
