use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Optimization settings shared by the trainable models.
///
/// [`Default`] carries the full-scale values (50 epochs, batch 20,
/// patience 10, 400-d embeddings, 600 hidden units, AdamW at 4e-5).
/// [`TrainConfig::desk`] shrinks them for runs that finish in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Tokens seen fewer times than this map to `<unk>`.
    pub min_token_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 20,
            patience: 10,
            seed: 0,
            embedding_dim: 400,
            hidden_dim: 600,
            learning_rate: 4e-5,
            weight_decay: 0.01,
            min_token_count: 1,
        }
    }
}

impl TrainConfig {
    pub fn desk() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 20,
            patience: 10,
            seed: 0,
            embedding_dim: 32,
            hidden_dim: 32,
            learning_rate: 1e-2,
            weight_decay: 0.0,
            min_token_count: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("patience", self.patience),
            ("embedding_dim", self.embedding_dim),
            ("hidden_dim", self.hidden_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(alloc::format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument("weight_decay must be non-negative".into()));
        }
        Ok(())
    }
}
