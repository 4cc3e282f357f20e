//! Core distances and the mutual-reachability minimum spanning tree.

use rayon::prelude::*;

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Distance from each point to its `min_samples`-th nearest neighbor, where
/// the point itself counts as the first neighbor (so `min_samples = 1` gives
/// zero).
pub fn core_distances(points: &[Vec<f64>], min_samples: usize) -> Vec<f64> {
    let n = points.len();
    if min_samples <= 1 || n < 2 {
        return vec![0.0; n];
    }
    // index among the other n - 1 distances, sorted ascending
    let rank = (min_samples - 2).min(n - 2);
    points
        .par_iter()
        .enumerate()
        .map_init(Vec::new, |dists, (i, p)| {
            dists.clear();
            dists.extend(
                points
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, q)| euclidean(p, q)),
            );
            let (_, kth, _) = dists.select_nth_unstable_by(rank, f64::total_cmp);
            *kth
        })
        .collect()
}

#[inline]
pub fn mutual_reachability(a: usize, b: usize, points: &[Vec<f64>], core: &[f64]) -> f64 {
    euclidean(&points[a], &points[b]).max(core[a]).max(core[b])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Prim's algorithm over the complete mutual-reachability graph.
///
/// The next vertex is the one with the smallest key, lowest index on ties; a
/// key is only replaced by a strictly smaller weight, or an equal weight from
/// a lower-indexed tree vertex.
pub fn mutual_reachability_mst(points: &[Vec<f64>], core: &[f64]) -> Vec<MstEdge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut key = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n - 1);

    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        key.par_iter_mut()
            .zip(parent.par_iter_mut())
            .enumerate()
            .filter(|(j, _)| !in_tree[*j])
            .for_each(|(j, (k, p))| {
                let w = mutual_reachability(current, j, points, core);
                if w < *k || (w == *k && current < *p) {
                    *k = w;
                    *p = current;
                }
            });

        let next = (0..n)
            .into_par_iter()
            .filter(|&j| !in_tree[j])
            .min_by(|&x, &y| key[x].total_cmp(&key[y]).then(x.cmp(&y)))
            .expect("vertices remain outside the tree");
        in_tree[next] = true;
        edges.push(MstEdge {
            a: parent[next],
            b: next,
            weight: key[next],
        });
        current = next;
    }
    edges
}
