use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Graph, GraphError};
use crate::numerics::Tensor;

/// On-disk graph: `{"n": 3, "edges": [[0, 1]], "attributes": [[..], ..]}`,
/// with every edge listed once as `[i, j]`, `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub attributes: Vec<Vec<f64>>,
}

impl From<&Graph> for GraphFile {
    fn from(g: &Graph) -> Self {
        GraphFile {
            n: g.n(),
            edges: g.edges().into_iter().map(|(i, j)| [i, j]).collect(),
            attributes: (0..g.n()).map(|r| g.attributes().row(r).to_vec()).collect(),
        }
    }
}

impl TryFrom<GraphFile> for Graph {
    type Error = GraphError;

    fn try_from(f: GraphFile) -> Result<Self, GraphError> {
        for &[i, j] in &f.edges {
            if i >= f.n || j >= f.n {
                return Err(GraphError::EdgeOutOfRange { i, j, n: f.n });
            }
            if i >= j {
                return Err(GraphError::EdgeOrder { i, j });
            }
        }
        if f.attributes.len() != f.n {
            return Err(GraphError::AttributeRows { rows: f.attributes.len(), n: f.n });
        }
        let width = f.attributes.first().map_or(0, Vec::len);
        if let Some(bad) = f.attributes.iter().position(|r| r.len() != width) {
            return Err(GraphError::Parse {
                path: Default::default(),
                message: format!("attributes row {bad} has {} values, expected {width}", f.attributes[bad].len()),
            });
        }
        let attributes = Tensor::from_vec(f.n, width, f.attributes.concat()).expect("checked widths");
        let edges: Vec<(usize, usize)> = f.edges.iter().map(|&[i, j]| (i, j)).collect();
        Graph::from_edges(f.n, &edges, attributes)
    }
}

fn read(path: &Path) -> Result<String, GraphError> {
    fs::read_to_string(path).map_err(|source| GraphError::Io { path: path.to_owned(), source })
}

fn convert(path: &Path, file: GraphFile) -> Result<Graph, GraphError> {
    Graph::try_from(file).map_err(|e| match e {
        GraphError::Parse { message, .. } => GraphError::Parse { path: path.to_owned(), message },
        other => GraphError::Invalid { path: path.to_owned(), source: Box::new(other) },
    })
}

pub fn load_graph(path: &Path) -> Result<Graph, GraphError> {
    let text = read(path)?;
    let file: GraphFile =
        serde_json::from_str(&text).map_err(|e| GraphError::Parse { path: path.to_owned(), message: e.to_string() })?;
    convert(path, file)
}

/// Reads either a single graph object or an array of them.
pub fn load_graphs(path: &Path) -> Result<Vec<Graph>, GraphError> {
    let text = read(path)?;
    let parse_err = |e: serde_json::Error| GraphError::Parse { path: path.to_owned(), message: e.to_string() };
    let files: Vec<GraphFile> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(parse_err)?
    } else {
        vec![serde_json::from_str(&text).map_err(parse_err)?]
    };
    files.into_iter().map(|f| convert(path, f)).collect()
}

pub fn save_graph(graph: &Graph, path: &Path) -> Result<(), GraphError> {
    let text = serde_json::to_string(&GraphFile::from(graph)).expect("graph serializes");
    fs::write(path, text).map_err(|source| GraphError::Io { path: path.to_owned(), source })
}

pub fn save_graphs(graphs: &[Graph], path: &Path) -> Result<(), GraphError> {
    let files: Vec<GraphFile> = graphs.iter().map(GraphFile::from).collect();
    let text = serde_json::to_string(&files).expect("graphs serialize");
    fs::write(path, text).map_err(|source| GraphError::Io { path: path.to_owned(), source })
}
