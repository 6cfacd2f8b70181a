use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, GraphError};
use crate::numerics::Tensor;

/// How hop distances to anchors become embedding entries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionTransform {
    /// `1 / (d + 1)`; unreachable anchors give 0.
    #[default]
    Reciprocal,
    /// The raw hop count `d`; unreachable anchors give `n`.
    RawHops,
}

/// Per-node distances to a set of anchors, one column per anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionEmbedding {
    pub values: Tensor,
    pub anchors: Vec<usize>,
}

/// Draws `min(k, n)` distinct anchors uniformly without replacement. When the
/// graph has fewer than `k` nodes the last drawn anchor is repeated so the
/// list always has length `k`.
pub fn select_anchors(g: &Graph, k: usize, rng: &mut impl Rng) -> Result<Vec<usize>, GraphError> {
    if k == 0 {
        return Err(GraphError::ZeroAnchors);
    }
    if g.n() == 0 {
        return Err(GraphError::EmptyGraph);
    }
    let mut anchors = rand::seq::index::sample(rng, g.n(), k.min(g.n())).into_vec();
    let last = *anchors.last().expect("at least one anchor");
    anchors.resize(k, last);
    Ok(anchors)
}

/// BFS from every anchor; entry `(i, j)` is the transformed hop distance from
/// node `i` to `anchors[j]`.
pub fn position_embedding(
    g: &Graph,
    anchors: &[usize],
    transform: PositionTransform,
) -> Result<PositionEmbedding, GraphError> {
    let n = g.n();
    if let Some(&bad) = anchors.iter().find(|&&a| a >= n) {
        return Err(GraphError::AnchorOutOfRange { anchor: bad, n });
    }
    let mut values = Tensor::zeros(n, anchors.len());
    for (j, &a) in anchors.iter().enumerate() {
        for (i, d) in g.hop_distances(a).into_iter().enumerate() {
            let v = match (transform, d) {
                (PositionTransform::Reciprocal, Some(d)) => 1.0 / (d as f64 + 1.0),
                (PositionTransform::Reciprocal, None) => 0.0,
                (PositionTransform::RawHops, Some(d)) => d as f64,
                (PositionTransform::RawHops, None) => n as f64,
            };
            values.set(i, j, v);
        }
    }
    Ok(PositionEmbedding { values, anchors: anchors.to_vec() })
}
