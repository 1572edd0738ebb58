//! Unsupervised extract-then-compress summarization.
//!
//! An extractor agent points at salient sentences of a document and a
//! compressor agent points at words inside those sentences. Both are
//! attentional recurrent encoders with pointer-network decoders, trained by
//! self-critical policy gradient against a reference-free reward: semantic
//! coverage measured by an optimal-transport distance between term-frequency
//! distributions, plus SLOR fluency under an n-gram language model.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod rewards;
pub mod toy;
pub mod training;

pub use error::{Error, Result};
