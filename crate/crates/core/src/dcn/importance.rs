use ndarray::{s, ArrayView2};
use serde::Serialize;

use super::params::{DcnParameters, Segment};
use crate::{Error, Result};

/// Normalised block Frobenius norms of a cross-layer weight matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureImportance {
    pub semantic: f64,
    pub belief: f64,
    pub period: f64,
    pub semantic_belief: f64,
    pub semantic_period: f64,
    pub belief_period: f64,
}

impl FeatureImportance {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.semantic,
            self.belief,
            self.period,
            self.semantic_belief,
            self.semantic_period,
            self.belief_period,
        ]
    }

    pub const LABELS: [&'static str; 6] = [
        "semantic",
        "belief",
        "period",
        "semantic x belief",
        "semantic x period",
        "belief x period",
    ];
}

/// Scores a square `3n × 3n` weight matrix laid out by [`Segment`].
/// Diagonal blocks score single embeddings; each interaction averages the
/// norms of its two off-diagonal blocks. Scores are divided by their sum.
pub fn block_importance(w: ArrayView2<'_, f64>, embed_dim: usize) -> Result<FeatureImportance> {
    if w.dim() != (3 * embed_dim, 3 * embed_dim) {
        return Err(Error::Shape(format!(
            "cross weight {:?} is not {}x{}",
            w.dim(),
            3 * embed_dim,
            3 * embed_dim
        )));
    }
    let norm = |a: Segment, b: Segment| {
        w.slice(s![a.range(embed_dim), b.range(embed_dim)])
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    };
    use Segment::*;
    let raw = [
        norm(Semantic, Semantic),
        norm(Belief, Belief),
        norm(Period, Period),
        (norm(Semantic, Belief) + norm(Belief, Semantic)) / 2.0,
        (norm(Semantic, Period) + norm(Period, Semantic)) / 2.0,
        (norm(Belief, Period) + norm(Period, Belief)) / 2.0,
    ];
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateImportance);
    }
    Ok(FeatureImportance {
        semantic: raw[0] / total,
        belief: raw[1] / total,
        period: raw[2] / total,
        semantic_belief: raw[3] / total,
        semantic_period: raw[4] / total,
        belief_period: raw[5] / total,
    })
}

/// Importance computed from the first cross layer.
pub fn feature_importance(params: &DcnParameters) -> Result<FeatureImportance> {
    let first = params
        .cross
        .first()
        .ok_or_else(|| Error::Config("model has no cross layers".into()))?;
    block_importance(first.weight.view(), params.embed_dim())
}
