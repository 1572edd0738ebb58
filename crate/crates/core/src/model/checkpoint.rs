//! Single-file checkpoint: `CSUMCKPT`, a version, a JSON header, then every
//! array as little-endian f64 in header order.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingTable, Vocab};
use crate::error::{Error, Result};

use super::{ModelConfig, Summarizer};

const MAGIC: &[u8; 8] = b"CSUMCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const PARAM_PREFIX: &str = "params/";
const EMBEDDINGS: &str = "embeddings";

#[derive(Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    vocab: Vec<String>,
    seed: u64,
    step: u64,
    extra: serde_json::Value,
    arrays: Vec<(String, usize, usize)>,
}

/// Everything needed to resume training or run inference.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    /// Full token list, specials included.
    pub vocab: Vec<String>,
    pub seed: u64,
    pub step: u64,
    /// Caller-defined metadata (training config, counters).
    pub extra: serde_json::Value,
    pub arrays: Vec<(String, Array2<f64>)>,
}

impl Checkpoint {
    pub fn array(&self, name: &str) -> Option<&Array2<f64>> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, a)| a)
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        let header = Header {
            model: self.model.clone(),
            vocab: self.vocab.clone(),
            seed: self.seed,
            step: self.step,
            extra: self.extra.clone(),
            arrays: self.arrays.iter().map(|(n, a)| (n.clone(), a.nrows(), a.ncols())).collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let write = || -> std::io::Result<()> {
            let mut w = BufWriter::new(File::create(&tmp)?);
            w.write_all(MAGIC)?;
            w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
            w.write_all(&(json.len() as u64).to_le_bytes())?;
            w.write_all(&json)?;
            for (_, a) in &self.arrays {
                for v in a.iter() {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            w.into_inner()?.sync_all()
        };
        write().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!("{} is not a checkpoint", path.display())));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(io)?;
        let version = u32::from_le_bytes(word);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})"
            )));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(io)?;
        let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut json).map_err(io)?;
        let header: Header = serde_json::from_slice(&json)?;
        let mut arrays = Vec::with_capacity(header.arrays.len());
        let mut buf = [0u8; 8];
        for (name, rows, cols) in header.arrays {
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                r.read_exact(&mut buf).map_err(io)?;
                values.push(f64::from_le_bytes(buf));
            }
            let a = Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Checkpoint(e.to_string()))?;
            arrays.push((name, a));
        }
        Ok(Self { model: header.model, vocab: header.vocab, seed: header.seed, step: header.step, extra: header.extra, arrays })
    }
}

impl Summarizer {
    /// Snapshot of the model, its vocabulary and embeddings.
    pub fn to_checkpoint(&self, vocab: &Vocab, embeddings: &EmbeddingTable, seed: u64, step: u64) -> Checkpoint {
        let mut arrays: Vec<(String, Array2<f64>)> =
            self.params.iter().map(|(_, name, a)| (format!("{PARAM_PREFIX}{name}"), a.clone())).collect();
        arrays.push((EMBEDDINGS.to_string(), embeddings.matrix().clone()));
        Checkpoint {
            model: self.config.clone(),
            vocab: vocab.tokens().to_vec(),
            seed,
            step,
            extra: serde_json::Value::Null,
            arrays,
        }
    }

    /// Rebuilds the model, vocabulary and embeddings from a checkpoint.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, Vocab, EmbeddingTable)> {
        let mut model = Self::new(ck.model.clone(), ck.seed)?;
        for id in model.params.ids().collect::<Vec<_>>() {
            let name = format!("{PARAM_PREFIX}{}", model.params.name(id));
            let stored = ck.array(&name).ok_or_else(|| Error::Checkpoint(format!("missing array {name}")))?;
            let slot = model.params.get_mut(id);
            if slot.dim() != stored.dim() {
                return Err(Error::Checkpoint(format!(
                    "array {name} has shape {:?}, model expects {:?}",
                    stored.dim(),
                    slot.dim()
                )));
            }
            slot.assign(stored);
        }
        if ck.vocab.len() < 2 || ck.vocab[0] != crate::corpus::PAD || ck.vocab[1] != crate::corpus::UNK {
            return Err(Error::Checkpoint("vocabulary lacks the special tokens".into()));
        }
        let vocab = Vocab::from_tokens(ck.vocab[2..].iter().cloned());
        let matrix = ck.array(EMBEDDINGS).ok_or_else(|| Error::Checkpoint("missing embeddings".into()))?;
        if matrix.nrows() != vocab.len() || matrix.ncols() != ck.model.embedding_dim {
            return Err(Error::Checkpoint("embedding table does not match vocabulary or model".into()));
        }
        let embeddings = EmbeddingTable::from_matrix(matrix.clone())?;
        Ok((model, vocab, embeddings))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::model::{Budgets, DecodeMode};

    #[test]
    fn round_trip_preserves_outputs() {
        let cfg = ModelConfig { embedding_dim: 4, hidden: 2, layers: 1, heads: 2, max_sentences: 3, max_words: 4 };
        let model = Summarizer::new(cfg, 3).unwrap();
        let doc = Document::new("d", "Alpha beta gamma. Delta epsilon. Zeta eta theta iota.");
        let vocab = crate::corpus::build_vocab([&doc], 1).unwrap();
        let emb = EmbeddingTable::random(&vocab, 4, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut ck = model.to_checkpoint(&vocab, &emb, 3, 17);
        ck.extra = serde_json::json!({"note": "x"});
        ck.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, ck);
        let (m2, v2, e2) = Summarizer::from_checkpoint(&loaded).unwrap();
        let b = Budgets { sentences: 2, words: 3 };
        assert_eq!(
            model.summarize(&doc, &vocab, &emb, b, DecodeMode::Sampled, 4).unwrap(),
            m2.summarize(&doc, &v2, &e2, b, DecodeMode::Sampled, 4).unwrap()
        );
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&99u32.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Checkpoint(_))));
    }
}
