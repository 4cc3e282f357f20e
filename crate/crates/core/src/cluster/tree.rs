//! Single-linkage hierarchy, condensed cluster tree and cluster selection.

use super::mst::MstEdge;
use super::Selection;
use crate::structure::UnionFind;

/// Merge in the single-linkage dendrogram. Children index points
/// `0..n` or earlier merges `n..2n-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

/// Dendrogram from MST edges sorted by weight (ties by endpoint indices).
pub fn single_linkage(n: usize, mst: &[MstEdge]) -> Vec<Merge> {
    let mut edges: Vec<MstEdge> = mst.to_vec();
    edges.sort_by(|x, y| {
        x.weight
            .total_cmp(&y.weight)
            .then((x.a.min(x.b), x.a.max(x.b)).cmp(&(y.a.min(y.b), y.a.max(y.b))))
    });

    let mut uf = UnionFind::new(n);
    // dendrogram node currently representing each union-find root
    let mut node_of = (0..n).collect::<Vec<_>>();
    let mut sizes = vec![1usize; 2 * n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for e in &edges {
        let (ra, rb) = (uf.find(e.a), uf.find(e.b));
        let (left, right) = (node_of[ra], node_of[rb]);
        let id = n + merges.len();
        sizes[id] = sizes[left] + sizes[right];
        merges.push(Merge {
            left,
            right,
            distance: e.weight,
            size: sizes[id],
        });
        let root = uf
            .union(ra, rb)
            .expect("MST edges join distinct components");
        node_of[root] = id;
    }
    merges
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Child {
    Point(usize),
    Cluster(usize),
}

/// Row of the condensed tree: `child` leaves `parent` at density `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondensedRow {
    pub parent: usize,
    pub child: Child,
    pub lambda: f64,
    pub size: usize,
}

#[derive(Debug, Clone)]
pub struct CondensedTree {
    pub rows: Vec<CondensedRow>,
    /// Number of clusters; cluster 0 is the root, and children always have
    /// larger ids than their parents.
    pub n_clusters: usize,
    pub n_points: usize,
}

fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        1.0 / distance
    } else {
        f64::INFINITY
    }
}

/// Points below dendrogram node `node`, in depth-first order.
fn leaves(n: usize, merges: &[Merge], node: usize, out: &mut Vec<usize>) {
    let mut stack = vec![node];
    while let Some(x) = stack.pop() {
        if x < n {
            out.push(x);
        } else {
            let m = &merges[x - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
}

fn node_size(n: usize, merges: &[Merge], node: usize) -> usize {
    if node < n {
        1
    } else {
        merges[node - n].size
    }
}

/// Condenses the dendrogram: a split only creates new clusters when both
/// sides have at least `min_cluster_size` points; otherwise the small side's
/// points fall out of the current cluster.
pub fn condense(n: usize, merges: &[Merge], min_cluster_size: usize) -> CondensedTree {
    let mut rows = Vec::new();
    let mut n_clusters = 1;
    if n == 0 {
        return CondensedTree {
            rows,
            n_clusters: 0,
            n_points: 0,
        };
    }
    if n == 1 {
        rows.push(CondensedRow {
            parent: 0,
            child: Child::Point(0),
            lambda: f64::INFINITY,
            size: 1,
        });
        return CondensedTree {
            rows,
            n_clusters,
            n_points: 1,
        };
    }

    let root = n + merges.len() - 1;
    // (dendrogram node, condensed cluster it belongs to), breadth first
    let mut queue = std::collections::VecDeque::from([(root, 0usize)]);
    let mut fallen = Vec::new();
    while let Some((node, cluster)) = queue.pop_front() {
        if node < n {
            // a singleton reached directly (cluster of one point shrinking to it)
            rows.push(CondensedRow {
                parent: cluster,
                child: Child::Point(node),
                lambda: f64::INFINITY,
                size: 1,
            });
            continue;
        }
        let m = &merges[node - n];
        let lambda = lambda_of(m.distance);
        let big_left = node_size(n, merges, m.left) >= min_cluster_size;
        let big_right = node_size(n, merges, m.right) >= min_cluster_size;

        if big_left && big_right {
            for child in [m.left, m.right] {
                let id = n_clusters;
                n_clusters += 1;
                rows.push(CondensedRow {
                    parent: cluster,
                    child: Child::Cluster(id),
                    lambda,
                    size: node_size(n, merges, child),
                });
                queue.push_back((child, id));
            }
            continue;
        }
        for (child, big) in [(m.left, big_left), (m.right, big_right)] {
            if big {
                queue.push_back((child, cluster));
            } else {
                fallen.clear();
                leaves(n, merges, child, &mut fallen);
                rows.extend(fallen.iter().map(|&p| CondensedRow {
                    parent: cluster,
                    child: Child::Point(p),
                    lambda,
                    size: 1,
                }));
            }
        }
    }

    CondensedTree {
        rows,
        n_clusters,
        n_points: n,
    }
}

impl CondensedTree {
    /// Density at which each cluster appears (0 for the root).
    pub fn birth_lambdas(&self) -> Vec<f64> {
        let mut birth = vec![0.0; self.n_clusters];
        for row in &self.rows {
            if let Child::Cluster(c) = row.child {
                birth[c] = row.lambda;
            }
        }
        birth
    }

    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.n_clusters];
        for row in &self.rows {
            if let Child::Cluster(c) = row.child {
                parent[c] = Some(row.parent);
            }
        }
        parent
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.n_clusters];
        for row in &self.rows {
            if let Child::Cluster(c) = row.child {
                children[row.parent].push(c);
            }
        }
        children
    }

    /// Σ (λ_child − λ_birth) · size over each cluster's rows.
    pub fn stabilities(&self) -> Vec<f64> {
        let birth = self.birth_lambdas();
        let mut stability = vec![0.0; self.n_clusters];
        for row in &self.rows {
            // zero-distance duplicates would make the sum infinite
            if !row.lambda.is_finite() {
                continue;
            }
            let lambda = row.lambda;
            stability[row.parent] += (lambda - birth[row.parent]) * row.size as f64;
        }
        stability
    }

    /// Selected clusters in ascending id order. The root is never selected.
    pub fn select(&self, selection: Selection) -> Vec<usize> {
        if self.n_clusters <= 1 {
            return Vec::new();
        }
        let children = self.children();
        let mut selected = vec![false; self.n_clusters];
        match selection {
            Selection::Leaf => {
                for c in 1..self.n_clusters {
                    selected[c] = children[c].is_empty();
                }
            }
            Selection::ExcessOfMass => {
                let mut stability = self.stabilities();
                // children carry larger ids, so descending order is bottom-up
                for c in (1..self.n_clusters).rev() {
                    let child_sum: f64 = children[c].iter().map(|&k| stability[k]).sum();
                    if child_sum > stability[c] {
                        stability[c] = child_sum;
                    } else {
                        selected[c] = true;
                        let mut stack = children[c].clone();
                        while let Some(k) = stack.pop() {
                            selected[k] = false;
                            stack.extend_from_slice(&children[k]);
                        }
                    }
                }
            }
        }
        (0..self.n_clusters).filter(|&c| selected[c]).collect()
    }
}

/// Per-point label (`-1` for noise) and membership strength.
pub fn label_points(tree: &CondensedTree, selected: &[usize]) -> (Vec<i64>, Vec<f64>) {
    let n = tree.n_points;
    let parents = tree.parents();
    let mut label_of_cluster = vec![-1i64; tree.n_clusters];
    for (label, &c) in selected.iter().enumerate() {
        label_of_cluster[c] = label as i64;
    }
    // resolve every cluster to its selected ancestor-or-self
    let owner: Vec<i64> = (0..tree.n_clusters)
        .map(|c| {
            let mut x = Some(c);
            while let Some(k) = x {
                if label_of_cluster[k] >= 0 {
                    return label_of_cluster[k];
                }
                x = parents[k];
            }
            -1
        })
        .collect();

    let mut labels = vec![-1i64; n];
    let mut lambdas = vec![0.0; n];
    for row in &tree.rows {
        if let Child::Point(p) = row.child {
            labels[p] = owner[row.parent];
            lambdas[p] = row.lambda;
        }
    }

    let mut max_lambda = vec![0.0f64; selected.len()];
    for p in 0..n {
        if labels[p] >= 0 && lambdas[p].is_finite() {
            let m = &mut max_lambda[labels[p] as usize];
            *m = m.max(lambdas[p]);
        }
    }
    let strengths = (0..n)
        .map(|p| {
            if labels[p] < 0 {
                return 0.0;
            }
            let max = max_lambda[labels[p] as usize];
            if !lambdas[p].is_finite() || max <= 0.0 {
                1.0
            } else {
                (lambdas[p] / max).min(1.0)
            }
        })
        .collect();
    (labels, strengths)
}
