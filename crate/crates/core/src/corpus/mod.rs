//! Dataset ingestion, segmentation, vocabulary, embeddings and padding.

mod dataset;
mod document;
mod embeddings;
mod index;
mod stopwords;
mod vocab;

pub use dataset::{load_documents, load_reference_dataset, write_records, Record};
pub use document::{segment_document, split_sentences, tokenize, Document};
pub use embeddings::{load_embeddings, EmbeddingTable, OOV_RANGE};
pub use index::{pad_and_index, IndexedDocument, TruncationStats};
pub use stopwords::{Stopwords, STOPWORDS_ENV};
pub use vocab::{build_vocab, Vocab, PAD, UNK};
