//! Three-embedding deep cross network.
//!
//! An example `(individual, question, year)` is embedded as
//! `x0 = [belief(individual); W_s·e(question) + b_s; period(year)]`, where
//! `e(question)` is the frozen language-model vector of the question. `x0`
//! passes through cross layers `x_{l+1} = x0 ⊙ (W_l x_l + b_l) + x_l`, then
//! ReLU dense layers, then a sigmoid head. Gradients are derived by hand.

mod adam;
mod checkpoint;
mod config;
mod importance;
mod model;
mod params;

pub use adam::{adam_step, learning_rate_at, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointIndex};
pub use config::DcnConfig;
pub use importance::{block_importance, feature_importance, FeatureImportance};
pub use model::{
    backward, cross_layer_forward, forward, forward_batch, loss_bce, mean_bce, predict, sigmoid, Dropout, Example,
    ForwardCache, PROB_EPS,
};
pub use params::{DcnParameters, Linear, Segment};
