//! Independent reference implementations used as oracles by the
//! integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use nalgebra::DMatrix;
use rand::Rng;

use coordnet::association::ContingencyTable;
use coordnet::matrix::{NeighborEdge, NeighborGraph, SparseBinaryMatrix};

/// Random binary matrix where every row has at least one entry.
pub fn random_matrix<R: Rng>(
    rng: &mut R,
    n_rows: usize,
    n_cols: usize,
    density: f64,
) -> SparseBinaryMatrix {
    let rows: Vec<Vec<u32>> = (0..n_rows)
        .map(|_| {
            let mut row: Vec<u32> = (0..n_cols as u32)
                .filter(|_| rng.random_bool(density))
                .collect();
            if row.is_empty() {
                row.push(rng.random_range(0..n_cols as u32));
            }
            row
        })
        .collect();
    SparseBinaryMatrix::from_rows(n_cols, &rows).unwrap()
}

/// Random matrix with no empty rows or columns.
pub fn random_full_support<R: Rng>(
    rng: &mut R,
    n_rows: usize,
    n_cols: usize,
    density: f64,
) -> SparseBinaryMatrix {
    let mut sets: Vec<BTreeSet<u32>> = (0..n_rows)
        .map(|_| {
            (0..n_cols as u32)
                .filter(|_| rng.random_bool(density))
                .collect()
        })
        .collect();
    for j in 0..n_cols as u32 {
        sets[rng.random_range(0..n_rows)].insert(j);
    }
    for s in sets.iter_mut().filter(|s| s.is_empty()) {
        s.insert(rng.random_range(0..n_cols as u32));
    }
    let rows: Vec<Vec<u32>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
    SparseBinaryMatrix::from_rows(n_cols, &rows).unwrap()
}

pub fn row_sets(m: &SparseBinaryMatrix) -> Vec<HashSet<u32>> {
    (0..m.n_rows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// All-pairs k-NN: each row keeps its k most similar positive-cosine rows
/// (lower index on ties); edges are the union of those choices.
pub fn brute_knn(m: &SparseBinaryMatrix, k: usize) -> BTreeMap<(usize, usize), f64> {
    let sets = row_sets(m);
    let mut edges = BTreeMap::new();
    for u in 0..sets.len() {
        let mut scored: Vec<(f64, usize)> = (0..sets.len())
            .filter(|&v| v != u)
            .map(|v| {
                let common = sets[u].intersection(&sets[v]).count();
                let cos = common as f64 / ((sets[u].len() * sets[v].len()) as f64).sqrt();
                (cos.min(1.0), v)
            })
            .filter(|&(c, _)| c > 0.0)
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(c, v) in scored.iter().take(k) {
            edges.insert((u.min(v), u.max(v)), c);
        }
    }
    edges
}

/// 2×2 table counted cell by cell over all columns.
pub fn brute_table(m: &SparseBinaryMatrix, u: usize, v: usize) -> ContingencyTable {
    let sets = row_sets(m);
    let (mut a, mut b, mut c, mut d) = (0, 0, 0, 0);
    for j in 0..m.n_cols() as u32 {
        match (sets[u].contains(&j), sets[v].contains(&j)) {
            (true, true) => a += 1,
            (true, false) => b += 1,
            (false, true) => c += 1,
            (false, false) => d += 1,
        }
    }
    ContingencyTable::new(a, b, c, d)
}

/// Pearson's χ² from expected counts.
pub fn pearson_chi2(t: &ContingencyTable) -> f64 {
    let n = t.n() as f64;
    let cells = [[t.a as f64, t.b as f64], [t.c as f64, t.d as f64]];
    let rows = [cells[0][0] + cells[0][1], cells[1][0] + cells[1][1]];
    let cols = [cells[0][0] + cells[1][0], cells[0][1] + cells[1][1]];
    let mut chi2 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let expected = rows[i] * cols[j] / n;
            chi2 += (cells[i][j] - expected).powi(2) / expected;
        }
    }
    chi2
}

/// Random table with all four marginals positive.
pub fn random_table<R: Rng>(rng: &mut R, max_cell: u64) -> ContingencyTable {
    loop {
        let t = ContingencyTable::new(
            rng.random_range(0..=max_cell),
            rng.random_range(0..=max_cell),
            rng.random_range(0..=max_cell),
            rng.random_range(0..=max_cell),
        );
        if t.marginals().iter().all(|&x| x > 0) {
            return t;
        }
    }
}

/// Graph on `n` nodes with random edges carrying the given φ values.
pub fn random_phi_graph<R: Rng>(rng: &mut R, n: usize, n_edges: usize) -> NeighborGraph {
    use coordnet::association::{EdgeScore, PhiScore};
    let mut pairs = BTreeSet::new();
    while pairs.len() < n_edges.min(n * (n - 1) / 2) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(u, v)| {
            let value = if rng.random_bool(0.05) {
                None
            } else {
                Some(rng.random::<f64>())
            };
            NeighborEdge {
                u,
                v,
                cosine: 0.5,
                score: Some(EdgeScore {
                    table: ContingencyTable::new(1, 1, 1, 1),
                    phi: PhiScore {
                        value,
                        chi_squared: None,
                    },
                }),
            }
        })
        .collect();
    NeighborGraph {
        n_nodes: n,
        k: 0,
        edges,
    }
}

/// BFS over edges with φ ≥ t: (component count, edge count of the largest
/// component by node count, ties by edge count).
pub fn bfs_structure(g: &NeighborGraph, t: f64) -> (usize, usize, usize) {
    let kept: Vec<(usize, usize)> = g
        .edges
        .iter()
        .filter(|e| e.phi().is_some_and(|p| p >= t))
        .map(|e| (e.u, e.v))
        .collect();
    let mut adj = vec![Vec::new(); g.n_nodes];
    for &(u, v) in &kept {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut comp = vec![usize::MAX; g.n_nodes];
    let mut sizes = Vec::new();
    for s in 0..g.n_nodes {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        let mut queue = VecDeque::from([s]);
        comp[s] = id;
        while let Some(x) = queue.pop_front() {
            size += 1;
            for &y in &adj[x] {
                if comp[y] == usize::MAX {
                    comp[y] = id;
                    queue.push_back(y);
                }
            }
        }
        sizes.push(size);
    }
    let mut edge_counts = vec![0; sizes.len()];
    for &(u, _) in &kept {
        edge_counts[comp[u]] += 1;
    }
    let best = (0..sizes.len())
        .max_by(|&a, &b| {
            (sizes[a], edge_counts[a])
                .cmp(&(sizes[b], edge_counts[b]))
                .then(b.cmp(&a))
        })
        .unwrap();
    (sizes.len(), kept.len(), edge_counts[best])
}

/// Dense δ = X − r·cᵀ/N.
pub fn dense_centered(m: &SparseBinaryMatrix) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(m.n_rows(), m.n_cols());
    for i in 0..m.n_rows() {
        for &j in m.row(i) {
            x[(i, j as usize)] = 1.0;
        }
    }
    let total = m.nnz() as f64;
    let r: Vec<f64> = (0..m.n_rows()).map(|i| m.row_len(i) as f64).collect();
    let c: Vec<f64> = (0..m.n_cols()).map(|j| m.col_len(j) as f64).collect();
    DMatrix::from_fn(m.n_rows(), m.n_cols(), |i, j| {
        x[(i, j)] - r[i] * c[j] / total
    })
}

/// Descending singular values from a dense SVD.
pub fn dense_singular_values(d: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = d
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Kruskal over every pair of points under mutual reachability, with core
/// distances from a full sort (the point itself counts as a neighbor).
pub fn brute_mst_weight(points: &[Vec<f64>], min_samples: usize) -> f64 {
    let n = points.len();
    let dist = |a: usize, b: usize| {
        points[a]
            .iter()
            .zip(&points[b])
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let core: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n).map(|j| dist(i, j)).collect();
            d.sort_by(f64::total_cmp);
            d[(min_samples.max(1) - 1).min(n - 1)]
        })
        .collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            pairs.push((dist(a, b).max(core[a]).max(core[b]), a, b));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut total = 0.0;
    for (w, a, b) in pairs {
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            total += w;
        }
    }
    total
}

/// Isotropic Gaussian blobs plus uniform outliers; labels are blob indices,
/// `-1` for outliers.
pub fn gaussian_blobs<R: Rng>(
    rng: &mut R,
    centers: &[[f64; 2]],
    sizes: &[usize],
    spread: f64,
    n_outliers: usize,
    bounds: (f64, f64),
) -> (Vec<Vec<f64>>, Vec<i64>) {
    use rand_distr::{Distribution, StandardNormal};
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for (c, (&center, &size)) in centers.iter().zip(sizes).enumerate() {
        for _ in 0..size {
            let dx: f64 = StandardNormal.sample(rng);
            let dy: f64 = StandardNormal.sample(rng);
            points.push(vec![center[0] + spread * dx, center[1] + spread * dy]);
            truth.push(c as i64);
        }
    }
    for _ in 0..n_outliers {
        points.push(vec![
            rng.random_range(bounds.0..bounds.1),
            rng.random_range(bounds.0..bounds.1),
        ]);
        truth.push(-1);
    }
    (points, truth)
}
