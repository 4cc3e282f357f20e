//! Sparse binary incidence matrices and the exact cosine k-NN graph.
//!
//! The matrix keeps both a row-major and a column-major index so that the
//! nearest-neighbor search can walk from a user's tweets to each tweet's
//! audience without touching users that share nothing with it.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::association::EdgeScore;
use crate::error::{Error, Result};

/// Binary matrix stored as sorted row supports plus the transposed
/// (inverted) index over columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinaryMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    col_ptr: Vec<usize>,
    col_idx: Vec<u32>,
}

impl SparseBinaryMatrix {
    /// Builds a matrix from per-row column lists. Lists must be strictly
    /// increasing and in range.
    pub fn from_rows(n_cols: usize, rows: &[Vec<u32>]) -> Result<Self> {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_idx = Vec::with_capacity(nnz);
        for (i, row) in rows.iter().enumerate() {
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidData(format!(
                    "row {i} column indices are not strictly increasing"
                )));
            }
            if let Some(&last) = row.last() {
                if last as usize >= n_cols {
                    return Err(Error::Dimension(format!(
                        "row {i} references column {last} but matrix has {n_cols} columns"
                    )));
                }
            }
            row_idx.extend_from_slice(row);
            row_ptr.push(row_idx.len());
        }

        let mut col_counts = vec![0usize; n_cols];
        for &j in &row_idx {
            col_counts[j as usize] += 1;
        }
        let mut col_ptr = Vec::with_capacity(n_cols + 1);
        col_ptr.push(0);
        for count in &col_counts {
            col_ptr.push(col_ptr.last().unwrap() + count);
        }
        let mut fill = col_ptr[..n_cols].to_vec();
        let mut col_idx = vec![0u32; nnz];
        // rows are visited in ascending order, so each column list comes out sorted
        for i in 0..n_rows {
            for &j in &row_idx[row_ptr[i]..row_ptr[i + 1]] {
                col_idx[fill[j as usize]] = i as u32;
                fill[j as usize] += 1;
            }
        }

        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            row_idx,
            col_ptr,
            col_idx,
        })
    }

    /// Builds a matrix from (row, col) pairs; duplicates collapse.
    pub fn from_pairs(n_rows: usize, n_cols: usize, pairs: &[(u32, u32)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); n_rows];
        for &(i, j) in pairs {
            let row = rows.get_mut(i as usize).ok_or_else(|| {
                Error::Dimension(format!("row {i} out of range for {n_rows} rows"))
            })?;
            row.push(j);
        }
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
        }
        Self::from_rows(n_cols, &rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Sorted column indices present in row `i`.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.row_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Sorted row indices present in column `j`.
    pub fn col(&self, j: usize) -> &[u32] {
        &self.col_idx[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn col_len(&self, j: usize) -> usize {
        self.col_ptr[j + 1] - self.col_ptr[j]
    }

    /// Number of columns shared by rows `u` and `v`.
    pub fn overlap(&self, u: usize, v: usize) -> usize {
        sorted_intersection_len(self.row(u), self.row(v))
    }

    fn check_row(&self, i: usize) -> Result<()> {
        if i >= self.n_rows {
            return Err(Error::Dimension(format!(
                "row {i} out of range for {} rows",
                self.n_rows
            )));
        }
        Ok(())
    }
}

pub(crate) fn sorted_intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Cosine of two binary supports given their sizes and overlap.
///
/// Every cosine in the crate goes through this function so that equal
/// inputs always produce bit-identical values.
#[inline]
pub fn cosine_from_counts(overlap: usize, len_u: usize, len_v: usize) -> f64 {
    let value = overlap as f64 / ((len_u as f64) * (len_v as f64)).sqrt();
    value.min(1.0)
}

/// Cosine similarity between rows `u` and `v`.
pub fn cosine(m: &SparseBinaryMatrix, u: usize, v: usize) -> Result<f64> {
    m.check_row(u)?;
    m.check_row(v)?;
    for i in [u, v] {
        if m.row_len(i) == 0 {
            return Err(Error::ZeroSupport(i));
        }
    }
    Ok(cosine_from_counts(
        m.overlap(u, v),
        m.row_len(u),
        m.row_len(v),
    ))
}

/// Undirected edge of the neighbor graph, `u < v`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborEdge {
    pub u: usize,
    pub v: usize,
    pub cosine: f64,
    /// Filled in by [`crate::association::score_graph`].
    pub score: Option<EdgeScore>,
}

impl NeighborEdge {
    /// The φ value when the edge has been scored and φ is defined.
    pub fn phi(&self) -> Option<f64> {
        self.score.as_ref().and_then(|s| s.phi.value)
    }
}

/// Undirected union of every row's k most cosine-similar rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    pub n_nodes: usize,
    pub k: usize,
    /// Sorted by `(u, v)`.
    pub edges: Vec<NeighborEdge>,
}

impl NeighborGraph {
    /// Degree of every node.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    /// Largest defined φ among each node's incident edges.
    pub fn max_incident_phi(&self) -> Vec<Option<f64>> {
        let mut best: Vec<Option<f64>> = vec![None; self.n_nodes];
        for e in &self.edges {
            if let Some(phi) = e.phi() {
                for node in [e.u, e.v] {
                    best[node] = Some(best[node].map_or(phi, |b| b.max(phi)));
                }
            }
        }
        best
    }
}

/// One row's directed neighbor choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub row: usize,
    pub cosine: f64,
}

/// Ordering used for neighbor selection: higher cosine first, then lower
/// row index.
#[inline]
pub fn neighbor_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.cosine
        .partial_cmp(&a.cosine)
        .unwrap_or(Ordering::Equal)
        .then(a.row.cmp(&b.row))
}

struct Scratch {
    counts: Vec<u32>,
    touched: Vec<u32>,
}

fn row_neighbors(
    m: &SparseBinaryMatrix,
    u: usize,
    k: usize,
    scratch: &mut Scratch,
) -> Vec<Neighbor> {
    let Scratch { counts, touched } = scratch;
    for &t in m.row(u) {
        for &v in m.col(t as usize) {
            if v as usize == u {
                continue;
            }
            if counts[v as usize] == 0 {
                touched.push(v);
            }
            counts[v as usize] += 1;
        }
    }

    let len_u = m.row_len(u);
    let mut found: Vec<Neighbor> = touched
        .iter()
        .map(|&v| {
            let v = v as usize;
            Neighbor {
                row: v,
                cosine: cosine_from_counts(counts[v] as usize, len_u, m.row_len(v)),
            }
        })
        .collect();
    for &v in touched.iter() {
        counts[v as usize] = 0;
    }
    touched.clear();

    if found.len() > k {
        found.select_nth_unstable_by(k - 1, neighbor_order);
        found.truncate(k);
    }
    found.sort_by(neighbor_order);
    found
}

/// Each row's `k` nearest neighbors by cosine, found exactly through the
/// inverted index. Rows that share nothing with anyone get an empty list.
pub fn nearest_neighbors(m: &SparseBinaryMatrix, k: usize) -> Result<Vec<Vec<Neighbor>>> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    if k >= m.n_rows() {
        return Err(Error::Config(format!(
            "k = {k} must be smaller than the number of rows ({})",
            m.n_rows()
        )));
    }
    let lists = (0..m.n_rows())
        .into_par_iter()
        .map_init(
            || Scratch {
                counts: vec![0; m.n_rows()],
                touched: Vec::new(),
            },
            |scratch, u| row_neighbors(m, u, k, scratch),
        )
        .collect();
    Ok(lists)
}

/// Merges directed neighbor lists into an undirected, deduplicated edge set.
pub fn merge_neighbor_lists(n_nodes: usize, k: usize, lists: &[Vec<Neighbor>]) -> NeighborGraph {
    let mut edges: Vec<NeighborEdge> = lists
        .iter()
        .enumerate()
        .flat_map(|(u, list)| {
            list.iter().map(move |n| NeighborEdge {
                u: u.min(n.row),
                v: u.max(n.row),
                cosine: n.cosine,
                score: None,
            })
        })
        .collect();
    edges.sort_by_key(|e| (e.u, e.v));
    edges.dedup_by(|a, b| a.u == b.u && a.v == b.v);
    NeighborGraph { n_nodes, k, edges }
}

/// Builds the undirected k-NN cosine graph.
pub fn knn_graph(m: &SparseBinaryMatrix, k: usize) -> Result<NeighborGraph> {
    let lists = nearest_neighbors(m, k)?;
    Ok(merge_neighbor_lists(m.n_rows(), k, &lists))
}
