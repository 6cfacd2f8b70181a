//! Graph data model, synthetic Barabási–Albert data, k-hop targets, anchor
//! position embeddings, and dataset files.

mod dataset;
mod generate;
mod io;
mod position;

pub use dataset::{build_ba_dataset, Dataset, DatasetCounts, DatasetManifest};
pub use generate::{generate_ba, k_hop_reachability};
pub use io::{load_graph, load_graphs, save_graph, save_graphs, GraphFile};
pub use position::{position_embedding, select_anchors, PositionEmbedding, PositionTransform};

use std::collections::VecDeque;
use std::path::PathBuf;

use thiserror::Error;

use crate::numerics::Tensor;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("adjacency length {len} does not match {n} x {n}")]
    AdjacencyLength { n: usize, len: usize },
    #[error("adjacency is not symmetric at ({i}, {j})")]
    Asymmetric { i: usize, j: usize },
    #[error("self-loop on node {node}")]
    SelfLoop { node: usize },
    #[error("attribute matrix has {rows} rows for {n} nodes")]
    AttributeRows { rows: usize, n: usize },
    #[error("edge ({i}, {j}) out of range for {n} nodes")]
    EdgeOutOfRange { i: usize, j: usize, n: usize },
    #[error("edge ({i}, {j}) must be listed with i < j")]
    EdgeOrder { i: usize, j: usize },
    #[error("duplicate edge ({i}, {j})")]
    DuplicateEdge { i: usize, j: usize },
    #[error("paired graphs have {source_n} and {target_n} nodes")]
    PairSize { source_n: usize, target_n: usize },
    #[error("need at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("hop count must be at least 1")]
    ZeroHops,
    #[error("anchor count must be at least 1")]
    ZeroAnchors,
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("anchor {anchor} out of range for {n} nodes")]
    AnchorOutOfRange { anchor: usize, n: usize },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: Box<GraphError> },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Undirected, unweighted graph with a dense attribute matrix.
///
/// The adjacency is symmetric, binary and has an empty diagonal; attribute
/// rows correspond to nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    adjacency: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
    attributes: Tensor,
}

impl Graph {
    pub fn new(n: usize, adjacency: Vec<bool>, attributes: Tensor) -> Result<Self, GraphError> {
        if adjacency.len() != n * n {
            return Err(GraphError::AdjacencyLength { n, len: adjacency.len() });
        }
        if attributes.rows() != n {
            return Err(GraphError::AttributeRows { rows: attributes.rows(), n });
        }
        for i in 0..n {
            if adjacency[i * n + i] {
                return Err(GraphError::SelfLoop { node: i });
            }
            for j in (i + 1)..n {
                if adjacency[i * n + j] != adjacency[j * n + i] {
                    return Err(GraphError::Asymmetric { i, j });
                }
            }
        }
        let neighbors = (0..n).map(|i| (0..n).filter(|&j| adjacency[i * n + j]).collect()).collect();
        Ok(Graph { n, adjacency, neighbors, attributes })
    }

    /// Builds from an undirected edge list; each pair may appear in either
    /// orientation but only once.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], attributes: Tensor) -> Result<Self, GraphError> {
        let mut adjacency = vec![false; n * n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(GraphError::EdgeOutOfRange { i, j, n });
            }
            if i == j {
                return Err(GraphError::SelfLoop { node: i });
            }
            if adjacency[i * n + j] {
                return Err(GraphError::DuplicateEdge { i, j });
            }
            adjacency[i * n + j] = true;
            adjacency[j * n + i] = true;
        }
        Graph::new(n, adjacency, attributes)
    }

    /// Graph whose attribute matrix is its own adjacency matrix.
    pub fn with_adjacency_attributes(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut g = Graph::from_edges(n, edges, Tensor::zeros(n, 0))?;
        g.attributes = g.adjacency_tensor();
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn attributes(&self) -> &Tensor {
        &self.attributes
    }

    pub fn attribute_dim(&self) -> usize {
        self.attributes.cols()
    }

    /// Same structure, new attributes.
    pub fn with_attributes(&self, attributes: Tensor) -> Result<Self, GraphError> {
        if attributes.rows() != self.n {
            return Err(GraphError::AttributeRows { rows: attributes.rows(), n: self.n });
        }
        Ok(Graph { attributes, ..self.clone() })
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Edges as `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n).flat_map(|i| self.neighbors[i].iter().filter(move |&&j| j > i).map(move |&j| (i, j))).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// 0/1 adjacency as an `n x n` tensor.
    pub fn adjacency_tensor(&self) -> Tensor {
        Tensor::from_vec(self.n, self.n, self.adjacency.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
            .expect("square adjacency")
    }

    /// Hop distance from `source` to every node; `None` where unreachable.
    pub fn hop_distances(&self, source: usize) -> Vec<Option<usize>> {
        self.hop_distances_within(source, usize::MAX)
    }

    pub(crate) fn hop_distances_within(&self, source: usize, limit: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].expect("queued nodes have a distance");
            if d >= limit {
                continue;
            }
            for &w in &self.neighbors[u] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.hop_distances(0).iter().all(Option::is_some)
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`; attribute rows
    /// move with their nodes.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        assert_eq!(perm.len(), self.n);
        let n = self.n;
        let mut adjacency = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                adjacency[perm[i] * n + perm[j]] = self.adjacency[i * n + j];
            }
        }
        let mut attributes = Tensor::zeros(n, self.attribute_dim());
        for i in 0..n {
            for c in 0..self.attribute_dim() {
                attributes.set(perm[i], c, self.attributes.get(i, c));
            }
        }
        Graph::new(n, adjacency, attributes).expect("permutation preserves validity")
    }
}

/// Source and target realizations over one shared node set.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedExample {
    source: Graph,
    target: Graph,
}

impl PairedExample {
    pub fn new(source: Graph, target: Graph) -> Result<Self, GraphError> {
        if source.n() != target.n() {
            return Err(GraphError::PairSize { source_n: source.n(), target_n: target.n() });
        }
        Ok(PairedExample { source, target })
    }

    pub fn source(&self) -> &Graph {
        &self.source
    }

    pub fn target(&self) -> &Graph {
        &self.target
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_adjacency() {
        let attrs = Tensor::zeros(2, 1);
        assert!(matches!(Graph::new(2, vec![false, true, false, false], attrs.clone()), Err(GraphError::Asymmetric { .. })));
        assert!(matches!(Graph::new(2, vec![true, false, false, false], attrs.clone()), Err(GraphError::SelfLoop { .. })));
        assert!(matches!(Graph::new(3, vec![false; 9], attrs), Err(GraphError::AttributeRows { .. })));
    }

    #[test]
    fn edges_and_distances() {
        let g = Graph::with_adjacency_attributes(4, &[(0, 1), (2, 1), (2, 3)]).unwrap();
        assert_eq!(g.edges(), vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(g.hop_distances(0), vec![Some(0), Some(1), Some(2), Some(3)]);
        assert_eq!(g.attributes(), &g.adjacency_tensor());
        let lonely = Graph::from_edges(3, &[(0, 1)], Tensor::zeros(3, 0)).unwrap();
        assert_eq!(lonely.hop_distances(0)[2], None);
        assert!(!lonely.is_connected());
    }

    #[test]
    fn pairs_share_node_count() {
        let a = Graph::with_adjacency_attributes(3, &[]).unwrap();
        let b = Graph::with_adjacency_attributes(4, &[]).unwrap();
        assert!(PairedExample::new(a, b).is_err());
    }
}
