//! Class-balanced error metrics. Edge and non-edge adjacency entries each
//! carry half the adjacency weight, so a sparse target cannot be matched by
//! predicting no edges. The diagonal is ignored.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{Graph, PairedExample};
use crate::model::Model;
use crate::numerics::{ParamBinder, Tape, Tensor};
use crate::rng::{stream, stream_at};
use crate::training::{global_pairs, GraphItem};
use crate::translator::derangement;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub mse: f64,
    pub mape: f64,
}

impl MetricPair {
    /// Elementwise mean; `None` for an empty list.
    pub fn mean(items: &[MetricPair]) -> Option<MetricPair> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        Some(MetricPair { mse: items.iter().map(|m| m.mse).sum::<f64>() / n, mape: items.iter().map(|m| m.mape).sum::<f64>() / n })
    }
}

fn check_shape(what: &'static str, pred: &Tensor, rows: usize, cols: usize) -> Result<()> {
    if pred.rows() != rows {
        return Err(Error::Rows { what, left: pred.rows(), right: rows });
    }
    if pred.cols() != cols {
        return Err(Error::Width { what, expected: cols, got: pred.cols() });
    }
    Ok(())
}

fn percentage(pred: f64, target: f64) -> f64 {
    (pred - target).abs() / target.abs().max(1.0)
}

/// Class-balanced adjacency errors. A class with no entries drops out and
/// the other carries full weight; a single-node graph scores 0.
pub fn adjacency_errors(a_pred: &Tensor, target: &Graph) -> Result<MetricPair> {
    let n = target.n();
    check_shape("predicted adjacency", a_pred, n, n)?;
    // [sum sq, sum pct, count] for non-edges then edges.
    let mut acc = [[0.0; 3]; 2];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let truth = if target.has_edge(i, j) { 1.0 } else { 0.0 };
            let p = a_pred.get(i, j);
            let a = &mut acc[truth as usize];
            a[0] += (p - truth) * (p - truth);
            a[1] += percentage(p, truth);
            a[2] += 1.0;
        }
    }
    let present: Vec<_> = acc.iter().filter(|a| a[2] > 0.0).collect();
    let w = 1.0 / present.len().max(1) as f64;
    Ok(MetricPair {
        mse: present.iter().map(|a| w * a[0] / a[2]).sum(),
        mape: present.iter().map(|a| w * a[1] / a[2]).sum(),
    })
}

/// Plain mean errors over attribute entries; 0 when there are none.
pub fn attribute_errors(f_pred: &Tensor, target: &Graph) -> Result<MetricPair> {
    let f = target.attributes();
    check_shape("predicted attributes", f_pred, f.rows(), f.cols())?;
    if f.is_empty() {
        return Ok(MetricPair::default());
    }
    let n = f.len() as f64;
    let pairs = f_pred.data().iter().zip(f.data());
    Ok(MetricPair {
        mse: pairs.clone().map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n,
        mape: pairs.map(|(p, t)| percentage(*p, *t)).sum::<f64>() / n,
    })
}

/// Adjacency part plus attribute part, for both metrics.
pub fn score(a_pred: &Tensor, f_pred: &Tensor, target: &Graph) -> Result<MetricPair> {
    let a = adjacency_errors(a_pred, target)?;
    let f = attribute_errors(f_pred, target)?;
    Ok(MetricPair { mse: a.mse + f.mse, mape: a.mape + f.mape })
}

pub fn weighted_mse(a_pred: &Tensor, f_pred: &Tensor, target: &Graph) -> Result<f64> {
    Ok(score(a_pred, f_pred, target)?.mse)
}

pub fn weighted_mape(a_pred: &Tensor, f_pred: &Tensor, target: &Graph) -> Result<f64> {
    Ok(score(a_pred, f_pred, target)?.mape)
}

/// Per-pair scores of source → target translation. Pair `i` draws its
/// anchors from stream `("eval", i)` of `seed`.
pub fn score_pairs(model: &Model, pairs: &[PairedExample], seed: u64) -> Result<Vec<MetricPair>> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, pair)| {
            let anchors = model.draw_anchors(pair.source(), &mut stream_at(seed, "eval", i as u64))?;
            let (a, f) = model.predict_values(pair.source(), &anchors)?;
            score(&a, &f, pair.target())
        })
        .collect()
}

/// Mean metrics over the test pairs.
pub fn evaluate_test(model: &Model, pairs: &[PairedExample], seed: u64) -> Result<MetricPair> {
    MetricPair::mean(&score_pairs(model, pairs, seed)?).ok_or(Error::EmptyTestSet)
}

/// Mean discriminator scores on matched and mismatched global features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiSeparation {
    pub matched: f64,
    pub deranged: f64,
}

/// Scores `(g_s, g_t_pred)` for each of `graphs` against its own translation
/// and against another graph's, paired by a derangement drawn from stream
/// `"mi_probe"` of `seed`. Graph `i` takes anchors from `("eval", i)`.
pub fn mi_separation(model: &Model, graphs: &[Graph], seed: u64) -> Result<MiSeparation> {
    let est = model.mi.as_ref().ok_or(Error::MiBatch(0))?;
    let perm = derangement(graphs.len(), &mut stream(seed, "mi_probe"))?;
    let items = graphs
        .iter()
        .enumerate()
        .map(|(i, graph)| Ok(GraphItem { graph, anchors: model.draw_anchors(graph, &mut stream_at(seed, "eval", i as u64))? }))
        .collect::<Result<Vec<_>>>()?;
    let tape = Tape::new();
    let b = ParamBinder::frozen(&tape, &model.store);
    let (gs, gt) = global_pairs(model, &b, &items)?;
    let matched = est.score(&b, gs, gt)?.mean()?.item();
    let deranged = est.score(&b, gs, gt.select_rows(&perm)?)?.mean()?.item();
    Ok(MiSeparation { matched, deranged })
}
