use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Budgets, ModelConfig};
use crate::rewards::{OtSolver, RewardWeights};

/// Training run settings. Serialized as a flat key-value TOML document; the
/// model architecture keys sit at the same level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    pub grad_clip_norm: f64,
    /// Sentences the extractor selects.
    pub extract_budget: usize,
    /// Words the compressor selects.
    pub compress_budget: usize,
    pub w_cov: f64,
    pub w_flu: f64,
    pub seed: u64,
    /// JSON-lines training documents.
    pub data: Option<PathBuf>,
    /// Text-format word vectors; random vectors are drawn when absent.
    pub embeddings: Option<PathBuf>,
    /// Steps between checkpoints (0 writes only the final one).
    pub checkpoint_every: u64,
    /// Epochs during which only the extractor is trained.
    pub staged_extractor_epochs: usize,
    pub lm_order: usize,
    pub min_count: usize,
    /// Use the exact transport solver instead of Sinkhorn.
    pub exact_ot: bool,
    #[serde(flatten)]
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 3,
            epochs: 10,
            weight_decay: 0.01,
            grad_clip_norm: 2.0,
            extract_budget: 3,
            compress_budget: 58,
            w_cov: 1.0,
            w_flu: 2.0,
            seed: 0,
            data: None,
            embeddings: None,
            checkpoint_every: 0,
            staged_extractor_epochs: 0,
            lm_order: 3,
            min_count: 1,
            exact_ot: false,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn budgets(&self) -> Budgets {
        Budgets { sentences: self.extract_budget, words: self.compress_budget }
    }

    pub fn weights(&self) -> RewardWeights {
        RewardWeights { coverage: self.w_cov, fluency: self.w_flu }
    }

    pub fn solver(&self) -> OtSolver {
        if self.exact_ot {
            OtSolver::Exact
        } else {
            OtSolver::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("grad_clip_norm", self.grad_clip_norm),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.lm_order == 0 || self.min_count == 0 {
            return Err(Error::Config("batch_size, epochs, lm_order and min_count must be positive".into()));
        }
        if !(self.w_cov.is_finite() && self.w_flu.is_finite()) {
            return Err(Error::Config("reward weights must be finite".into()));
        }
        self.budgets().validate()?;
        self.model.validate()
    }
}
