use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::Vocab;

/// Range of the uniform draw used for tokens missing from the embedding file.
pub const OOV_RANGE: f64 = 0.05;

/// Word embedding lookup table, one row per vocabulary id.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    matrix: Array2<f64>,
}

impl EmbeddingTable {
    /// Wraps a matrix; the PAD row is forced to zero.
    pub fn from_matrix(mut matrix: Array2<f64>) -> Result<Self> {
        if matrix.nrows() < 2 || matrix.ncols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "embedding matrix of shape {:?} cannot hold PAD and UNK",
                matrix.dim()
            )));
        }
        matrix.row_mut(Vocab::PAD_ID).fill(0.0);
        Ok(Self { matrix })
    }

    /// Every row drawn from the fixed-seed OOV distribution.
    pub fn random(vocab: &Vocab, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut matrix =
            Array2::from_shape_fn((vocab.len(), dim), |_| rng.gen_range(-OOV_RANGE..OOV_RANGE));
        matrix.row_mut(Vocab::PAD_ID).fill(0.0);
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn row(&self, id: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(id)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }
}

/// Reads a whitespace-separated `token v1 .. vd` file. Vocabulary tokens found
/// in the file get their vector verbatim; the rest keep a seeded random row.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    vocab: &Vocab,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut table = EmbeddingTable::random(vocab, dim, seed);
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line_no = n + 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        if values.len() != dim {
            return Err(Error::EmbeddingDimension {
                line: line_no,
                expected: dim,
                found: values.len(),
            });
        }
        let Some(id) = vocab.get(token) else { continue };
        if id == Vocab::PAD_ID {
            continue;
        }
        for (k, v) in values.iter().enumerate() {
            table.matrix[[id, k]] = v.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("bad number {v:?}"),
            })?;
        }
    }
    Ok(table)
}
