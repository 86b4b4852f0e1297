use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Architecture and optimisation settings.
///
/// Defaults reproduce the published recipe: 50-wide embeddings, three cross
/// and three dense layers of width 150, dropout 0.2, Adam at 2e-5 decayed by
/// 0.96 every 80 000 steps (staircase), batch size 128.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcnConfig {
    pub embed_dim: usize,
    pub num_cross_layers: usize,
    pub num_dense_layers: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub decay_steps: u64,
    pub decay_rate: f64,
    pub staircase: bool,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for DcnConfig {
    fn default() -> Self {
        Self {
            embed_dim: 50,
            num_cross_layers: 3,
            num_dense_layers: 3,
            dropout: 0.2,
            learning_rate: 2e-5,
            decay_steps: 80_000,
            decay_rate: 0.96,
            staircase: true,
            batch_size: 128,
            max_epochs: 10,
            patience: 2,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-7,
            seed: 42,
        }
    }
}

impl DcnConfig {
    /// Width of the concatenated input and of every hidden layer.
    pub fn hidden(&self) -> usize {
        3 * self.embed_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(Error::Config("embed_dim must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.decay_steps == 0 {
            return Err(Error::Config("decay_steps must be positive".into()));
        }
        Ok(())
    }
}
