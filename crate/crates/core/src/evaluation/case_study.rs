//! Export of one translated test pair for visual inspection.
//!
//! The decoder's adjacency need not be symmetric, so an undirected pair
//! `{i, j}` is drawn with probability `(A[i][j] + A[j][i]) / 2`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{Graph, PairedExample};
use crate::model::Model;
use crate::numerics::Tensor;
use crate::rng::stream;

/// Above this an edge is drawn solid (black when true, red when false).
pub const CONFIDENT: f64 = 0.2;
/// From this up to and including [`CONFIDENT`] an edge is drawn grey.
pub const FAINT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeBucket {
    ConfidentTrue,
    ConfidentFalse,
    Faint,
    Omitted,
}

impl EdgeBucket {
    pub fn of(probability: f64, in_target: bool) -> EdgeBucket {
        if probability > CONFIDENT {
            if in_target {
                EdgeBucket::ConfidentTrue
            } else {
                EdgeBucket::ConfidentFalse
            }
        } else if probability >= FAINT {
            EdgeBucket::Faint
        } else {
            EdgeBucket::Omitted
        }
    }

    fn color(self) -> Option<&'static str> {
        match self {
            EdgeBucket::ConfidentTrue => Some("black"),
            EdgeBucket::ConfidentFalse => Some("red"),
            EdgeBucket::Faint => Some("grey"),
            EdgeBucket::Omitted => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedEdge {
    pub i: usize,
    pub j: usize,
    pub probability: f64,
    pub in_target: bool,
    pub bucket: EdgeBucket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudy {
    pub n: usize,
    pub seed: u64,
    /// Decoder output as produced, row `i` column `j`.
    pub raw: Vec<Vec<f64>>,
    /// Every unordered pair `i < j` with its averaged probability.
    pub edges: Vec<PredictedEdge>,
}

fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

impl CaseStudy {
    /// Translates `pair.source()` with anchors drawn from stream
    /// `"case_study"` of `seed`.
    pub fn new(model: &Model, pair: &PairedExample, seed: u64) -> Result<CaseStudy> {
        let source = pair.source();
        let anchors = model.draw_anchors(source, &mut stream(seed, "case_study"))?;
        let (a, _) = model.predict_values(source, &anchors)?;
        Ok(Self::from_probabilities(&a, pair.target(), seed))
    }

    pub fn from_probabilities(a: &Tensor, target: &Graph, seed: u64) -> CaseStudy {
        let n = target.n();
        let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                let probability = 0.5 * (a.get(i, j) + a.get(j, i));
                let in_target = target.has_edge(i, j);
                edges.push(PredictedEdge { i, j, probability, in_target, bucket: EdgeBucket::of(probability, in_target) });
            }
        }
        CaseStudy { n, seed, raw: rows(a), edges }
    }

    pub fn predicted_dot(&self) -> String {
        let mut out = dot_header("predicted", self.n);
        for e in &self.edges {
            if let Some(color) = e.bucket.color() {
                let _ = writeln!(out, "  {} -- {} [color={color}, label=\"{:.3}\"];", e.i, e.j, e.probability);
            }
        }
        out.push_str("}\n");
        out
    }

    /// Writes `source.dot`, `target.dot`, `predicted.dot` and
    /// `probabilities.json` into `dir`.
    pub fn write(&self, pair: &PairedExample, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(Error::io(&path))
        };
        write("source.dot", graph_dot("source", pair.source()))?;
        write("target.dot", graph_dot("target", pair.target()))?;
        write("predicted.dot", self.predicted_dot())?;
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        write("probabilities.json", json + "\n")
    }
}

fn dot_header(name: &str, n: usize) -> String {
    let mut out = format!("graph {name} {{\n  node [shape=circle];\n");
    for i in 0..n {
        let _ = writeln!(out, "  {i};");
    }
    out
}

pub fn graph_dot(name: &str, g: &Graph) -> String {
    let mut out = dot_header(name, g.n());
    for (i, j) in g.edges() {
        let _ = writeln!(out, "  {i} -- {j};");
    }
    out.push_str("}\n");
    out
}

/// Builds the case study for `pair` and writes it to `dir`.
pub fn export_case_study(model: &Model, pair: &PairedExample, seed: u64, dir: &Path) -> Result<CaseStudy> {
    let cs = CaseStudy::new(model, pair, seed)?;
    cs.write(pair, dir)?;
    Ok(cs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Ablation, ModelConfig};

    fn pair() -> PairedExample {
        let s = Graph::with_adjacency_attributes(3, &[(0, 1), (1, 2)]).unwrap();
        let t = crate::graphs::k_hop_reachability(&s, 2).unwrap();
        PairedExample::new(s, t).unwrap()
    }

    #[test]
    fn buckets() {
        assert_eq!(EdgeBucket::of(0.2, true), EdgeBucket::Faint);
        assert_eq!(EdgeBucket::of(0.2000001, true), EdgeBucket::ConfidentTrue);
        assert_eq!(EdgeBucket::of(0.9, false), EdgeBucket::ConfidentFalse);
        assert_eq!(EdgeBucket::of(0.05, false), EdgeBucket::Faint);
        assert_eq!(EdgeBucket::of(0.0499, true), EdgeBucket::Omitted);
    }

    #[test]
    fn low_probabilities_draw_nothing() {
        let p = pair();
        let cs = CaseStudy::from_probabilities(&Tensor::filled(3, 3, 0.01), p.target(), 0);
        assert!(!cs.predicted_dot().contains("--"));
        assert_eq!(cs.raw, vec![vec![0.01; 3]; 3]);
        assert_eq!(cs.edges.len(), 3);
    }

    #[test]
    fn asymmetric_scores_are_averaged() {
        let p = pair();
        let mut a = Tensor::zeros(3, 3);
        a.set(0, 1, 0.5);
        a.set(1, 0, 0.3);
        a.set(0, 2, 0.3);
        let cs = CaseStudy::from_probabilities(&a, p.target(), 0);
        assert_eq!(cs.edges[0].probability, 0.4);
        assert_eq!(cs.edges[0].bucket, EdgeBucket::ConfidentTrue);
        assert_eq!(cs.edges[1].bucket, EdgeBucket::Faint);
        let dot = cs.predicted_dot();
        assert!(dot.contains("0 -- 1 [color=black"));
        assert!(dot.contains("0 -- 2 [color=grey"));
        assert!(!dot.contains("1 -- 2"));
    }

    #[test]
    fn writes_all_files() {
        let p = pair();
        let model = Model::new(&ModelConfig { k: 2, ..Default::default() }, Ablation::default(), 3, 3, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cs = export_case_study(&model, &p, 4, dir.path()).unwrap();
        for f in ["source.dot", "target.dot", "predicted.dot", "probabilities.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let target = std::fs::read_to_string(dir.path().join("target.dot")).unwrap();
        assert_eq!(target.matches("--").count(), 3);
        let back: CaseStudy = serde_json::from_str(&std::fs::read_to_string(dir.path().join("probabilities.json")).unwrap()).unwrap();
        assert_eq!(back, cs);
    }
}
