//! Density-based clustering (HDBSCAN) of user scores.
//!
//! Steps: core distances at `min_samples`, the mutual-reachability minimum
//! spanning tree, the single-linkage dendrogram, the condensed tree at
//! `min_cluster_size`, then stability-based cluster selection. Distances are
//! computed exactly, O(n²) in time and O(n) in memory.

mod mst;
mod tree;

pub use mst::{core_distances, euclidean, mutual_reachability, mutual_reachability_mst, MstEdge};
pub use tree::{condense, label_points, single_linkage, Child, CondensedRow, CondensedTree, Merge};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    ExcessOfMass,
    Leaf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterParams {
    pub min_cluster_size: usize,
    /// Defaults to `min_cluster_size` when unset.
    pub min_samples: Option<usize>,
    pub selection: Selection,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 50,
            min_samples: None,
            selection: Selection::ExcessOfMass,
        }
    }
}

impl ClusterParams {
    pub fn new(min_cluster_size: usize) -> Self {
        Self {
            min_cluster_size,
            ..Self::default()
        }
    }

    pub fn min_samples(&self) -> usize {
        self.min_samples.unwrap_or(self.min_cluster_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 2 {
            return Err(Error::Config("min_cluster_size must be at least 2".into()));
        }
        if self.min_samples == Some(0) {
            return Err(Error::Config("min_samples must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster label per point, `-1` for noise.
    pub labels: Vec<i64>,
    pub n_clusters: usize,
    /// In [0, 1]; zero for noise.
    pub membership_strength: Vec<f64>,
}

impl ClusterAssignment {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l < 0).count()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters];
        for &l in &self.labels {
            if l >= 0 {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }
}

/// Clusters `points` with HDBSCAN under the Euclidean metric.
///
/// `_seed` is accepted for interface stability; every step here is exact and
/// deterministic, so nothing is sampled.
pub fn cluster(
    points: &[Vec<f64>],
    params: &ClusterParams,
    _seed: u64,
) -> Result<ClusterAssignment> {
    params.validate()?;
    let n = points.len();
    if n < params.min_cluster_size {
        return Err(Error::Config(format!(
            "{n} points cannot hold a cluster of min_cluster_size {}",
            params.min_cluster_size
        )));
    }
    let dim = points.first().map_or(0, Vec::len);
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::Dimension(format!(
                "point {i} has {} coordinates, expected {dim}",
                p.len()
            )));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidData(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
    }

    let core = core_distances(points, params.min_samples());
    let mst = mutual_reachability_mst(points, &core);
    let merges = single_linkage(n, &mst);
    let tree = condense(n, &merges, params.min_cluster_size);
    let selected = tree.select(params.selection);
    let (labels, membership_strength) = label_points(&tree, &selected);
    Ok(ClusterAssignment {
        labels,
        n_clusters: selected.len(),
        membership_strength,
    })
}
