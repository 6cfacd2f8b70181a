use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::io::{load_graph, save_graph};
use super::{generate_ba, k_hop_reachability, Graph, GraphError, PairedExample};
use crate::rng::stream;

/// Hop radius of the synthetic target domain.
pub const TARGET_HOPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub paired_train: usize,
    pub unpaired_source: usize,
    pub unpaired_target: usize,
    pub paired_test: usize,
}

/// Training and test partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub paired_train: Vec<PairedExample>,
    pub unpaired_source: Vec<Graph>,
    pub unpaired_target: Vec<Graph>,
    pub paired_test: Vec<PairedExample>,
}

/// Contents of `manifest.json` in a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(flatten)]
    pub counts: DatasetCounts,
    pub n_nodes: Option<usize>,
    pub seed: Option<u64>,
}

fn ba_pair(n: usize, rng: &mut impl rand::Rng) -> Result<PairedExample, GraphError> {
    let source = generate_ba(n, rng)?;
    let target = k_hop_reachability(&source, TARGET_HOPS)?;
    PairedExample::new(source, target)
}

fn ba_unpaired(tag: &str, count: usize, n: usize, seed: u64, keep_target: bool) -> Result<Vec<Graph>, GraphError> {
    let mut rng = stream(seed, tag);
    (0..count)
        .map(|_| {
            let pair = ba_pair(n, &mut rng)?;
            Ok(if keep_target { pair.target } else { pair.source })
        })
        .collect()
}

/// Barabási–Albert sources with 2-hop reachability targets. Each partition
/// draws from its own stream derived from `seed`, so partitions never share
/// graphs by construction and growing one partition leaves the others intact.
pub fn build_ba_dataset(counts: DatasetCounts, n_nodes: usize, seed: u64) -> Result<Dataset, GraphError> {
    let paired = |tag: &str, count: usize| -> Result<Vec<PairedExample>, GraphError> {
        let mut rng = stream(seed, tag);
        (0..count).map(|_| ba_pair(n_nodes, &mut rng)).collect()
    };
    Ok(Dataset {
        paired_train: paired("dataset/paired_train", counts.paired_train)?,
        unpaired_source: ba_unpaired("dataset/unpaired_source", counts.unpaired_source, n_nodes, seed, false)?,
        unpaired_target: ba_unpaired("dataset/unpaired_target", counts.unpaired_target, n_nodes, seed, true)?,
        paired_test: paired("dataset/paired_test", counts.paired_test)?,
    })
}

fn width(count: usize) -> usize {
    count.saturating_sub(1).to_string().len().max(3)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GraphError + '_ {
    move |source| GraphError::Io { path: path.to_owned(), source }
}

impl Dataset {
    pub fn counts(&self) -> DatasetCounts {
        DatasetCounts {
            paired_train: self.paired_train.len(),
            unpaired_source: self.unpaired_source.len(),
            unpaired_target: self.unpaired_target.len(),
            paired_test: self.paired_test.len(),
        }
    }

    /// Attribute width shared by every graph, or `None` if the dataset is
    /// empty or inconsistent.
    pub fn attribute_dim(&self) -> Option<usize> {
        let mut dims = self
            .paired_train
            .iter()
            .chain(&self.paired_test)
            .flat_map(|p| [p.source(), p.target()])
            .chain(&self.unpaired_source)
            .chain(&self.unpaired_target)
            .map(Graph::attribute_dim);
        let first = dims.next()?;
        dims.all(|d| d == first).then_some(first)
    }

    /// Same paired partitions, with the unpaired partitions regenerated to
    /// hold `total` graphs split as evenly as possible (source gets the extra
    /// one). Regeneration uses the same streams as [`build_ba_dataset`], so a
    /// smaller unpaired set is a prefix of a larger one.
    pub fn with_unpaired_ba(&self, total: usize, n_nodes: usize, seed: u64) -> Result<Dataset, GraphError> {
        let sources = total.div_ceil(2);
        Ok(Dataset {
            paired_train: self.paired_train.clone(),
            unpaired_source: ba_unpaired("dataset/unpaired_source", sources, n_nodes, seed, false)?,
            unpaired_target: ba_unpaired("dataset/unpaired_target", total - sources, n_nodes, seed, true)?,
            paired_test: self.paired_test.clone(),
        })
    }

    /// Writes `manifest.json` plus one file per graph:
    /// `paired_train/NNN_source.json`, `paired_train/NNN_target.json`,
    /// `unpaired_source/NNN.json`, `unpaired_target/NNN.json`,
    /// `paired_test/NNN_{source,target}.json`.
    pub fn save(&self, dir: &Path, n_nodes: Option<usize>, seed: Option<u64>) -> Result<(), GraphError> {
        let write_pairs = |name: &str, pairs: &[PairedExample]| -> Result<(), GraphError> {
            let sub = dir.join(name);
            fs::create_dir_all(&sub).map_err(io_err(&sub))?;
            let w = width(pairs.len());
            for (i, p) in pairs.iter().enumerate() {
                save_graph(p.source(), &sub.join(format!("{i:0w$}_source.json")))?;
                save_graph(p.target(), &sub.join(format!("{i:0w$}_target.json")))?;
            }
            Ok(())
        };
        let write_single = |name: &str, graphs: &[Graph]| -> Result<(), GraphError> {
            let sub = dir.join(name);
            fs::create_dir_all(&sub).map_err(io_err(&sub))?;
            let w = width(graphs.len());
            for (i, g) in graphs.iter().enumerate() {
                save_graph(g, &sub.join(format!("{i:0w$}.json")))?;
            }
            Ok(())
        };
        write_pairs("paired_train", &self.paired_train)?;
        write_single("unpaired_source", &self.unpaired_source)?;
        write_single("unpaired_target", &self.unpaired_target)?;
        write_pairs("paired_test", &self.paired_test)?;
        let manifest = DatasetManifest { counts: self.counts(), n_nodes, seed };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes")).map_err(io_err(&path))
    }

    pub fn read_manifest(dir: &Path) -> Result<DatasetManifest, GraphError> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| GraphError::Parse { path, message: e.to_string() })
    }

    pub fn load(dir: &Path) -> Result<Dataset, GraphError> {
        let manifest = Self::read_manifest(dir)?;
        let c = manifest.counts;
        let read_pairs = |name: &str, count: usize| -> Result<Vec<PairedExample>, GraphError> {
            let w = width(count);
            (0..count)
                .map(|i| {
                    let s = load_graph(&dir.join(name).join(format!("{i:0w$}_source.json")))?;
                    let t = load_graph(&dir.join(name).join(format!("{i:0w$}_target.json")))?;
                    PairedExample::new(s, t)
                })
                .collect()
        };
        let read_single = |name: &str, count: usize| -> Result<Vec<Graph>, GraphError> {
            let w = width(count);
            (0..count).map(|i| load_graph(&dir.join(name).join(format!("{i:0w$}.json")))).collect()
        };
        Ok(Dataset {
            paired_train: read_pairs("paired_train", c.paired_train)?,
            unpaired_source: read_single("unpaired_source", c.unpaired_source)?,
            unpaired_target: read_single("unpaired_target", c.unpaired_target)?,
            paired_test: read_pairs("paired_test", c.paired_test)?,
        })
    }
}
