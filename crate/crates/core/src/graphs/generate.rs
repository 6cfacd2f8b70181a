use rand::Rng;

use super::{Graph, GraphError};

/// Grows a tree by preferential attachment: nodes `0` and `1` start joined,
/// then each new node links to one existing node chosen with probability
/// proportional to its current degree.
///
/// Attributes are the adjacency rows, so the attribute width equals `n`.
pub fn generate_ba(n: usize, rng: &mut impl Rng) -> Result<Graph, GraphError> {
    if n < 2 {
        return Err(GraphError::TooFewNodes(n));
    }
    let mut edges = Vec::with_capacity(n - 1);
    edges.push((0, 1));
    // Each node appears once per incident edge, so a uniform draw from this
    // list is a degree-proportional draw over nodes.
    let mut endpoints = Vec::with_capacity(2 * (n - 1));
    endpoints.extend([0, 1]);
    for new in 2..n {
        let target = endpoints[rng.random_range(0..endpoints.len())];
        edges.push((target, new));
        endpoints.push(target);
        endpoints.push(new);
    }
    Graph::with_adjacency_attributes(n, &edges)
}

/// Graph joining every pair of distinct nodes at hop distance `<= k` in `g`.
/// Attributes are copied from `g`.
pub fn k_hop_reachability(g: &Graph, k: usize) -> Result<Graph, GraphError> {
    if k == 0 {
        return Err(GraphError::ZeroHops);
    }
    let n = g.n();
    let mut adjacency = vec![false; n * n];
    for i in 0..n {
        for (j, d) in g.hop_distances_within(i, k).into_iter().enumerate() {
            if matches!(d, Some(d) if d >= 1 && d <= k) {
                adjacency[i * n + j] = true;
            }
        }
    }
    Graph::new(n, adjacency, g.attributes().clone())
}
