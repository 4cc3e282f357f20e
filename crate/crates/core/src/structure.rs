//! Threshold analytics over the φ-weighted neighbor graph: connected
//! components, the fragmentation sweep, φ histograms, valley detection and
//! coordination-candidate extraction.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::NeighborGraph;

/// Disjoint-set forest with union by size and path compression.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    /// Returns the new root, or `None` when already joined.
    pub fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        Some(ra)
    }

    pub fn component_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

/// Component label of every node; labels are numbered by first appearance
/// in node order.
pub fn connected_components(n_nodes: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut uf = UnionFind::new(n_nodes);
    for &(a, b) in edges {
        uf.union(a, b);
    }
    let mut label_of_root = vec![usize::MAX; n_nodes];
    let mut next = 0;
    (0..n_nodes)
        .map(|x| {
            let r = uf.find(x);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect()
}

/// One point of the fragmentation curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    /// Edges with defined φ ≥ threshold.
    pub n_edges: usize,
    /// Edges inside the largest connected component.
    pub n_lcc_edges: usize,
    /// log10(n_edges / n_lcc_edges); `None` when no component has an edge.
    pub log_ratio: Option<f64>,
    /// Components of the thresholded graph, isolated nodes included.
    pub n_components: usize,
}

/// Thresholds `{0, 1/n, …, (n−1)/n}`.
pub fn threshold_grid(n_points: usize) -> Vec<f64> {
    (0..n_points).map(|i| i as f64 / n_points as f64).collect()
}

/// Structure of the graph restricted to edges with defined φ ≥ `threshold`.
///
/// The largest component is the one with the most nodes; ties go to the one
/// with more edges, then to the one containing the lowest node index.
pub fn sweep_point(g: &NeighborGraph, threshold: f64) -> SweepPoint {
    let mut uf = UnionFind::new(g.n_nodes);
    let kept: Vec<(usize, usize)> = g
        .edges
        .iter()
        .filter(|e| e.phi().is_some_and(|phi| phi >= threshold))
        .map(|e| (e.u, e.v))
        .collect();
    for &(u, v) in &kept {
        uf.union(u, v);
    }
    let mut edge_count = vec![0usize; g.n_nodes];
    for &(u, _) in &kept {
        let r = uf.find(u);
        edge_count[r] += 1;
    }

    let mut n_components = 0;
    let mut best: Option<(usize, usize)> = None;
    for x in 0..g.n_nodes {
        let r = uf.find(x);
        if r == x {
            n_components += 1;
        }
        // strict comparison: the first node seen of each tied component wins
        let key = (uf.component_size(r), edge_count[r]);
        if best.is_none_or(|b| key > b) {
            best = Some(key);
        }
    }
    let n_lcc_edges = best.map_or(0, |(_, edges)| edges);

    let n_edges = kept.len();
    let log_ratio = (n_lcc_edges > 0).then(|| (n_edges as f64 / n_lcc_edges as f64).log10());
    SweepPoint {
        threshold,
        n_edges,
        n_lcc_edges,
        log_ratio,
        n_components,
    }
}

/// Fragmentation curve over a uniform grid of `n_points` thresholds.
/// Empty when no edge has a defined φ.
pub fn threshold_sweep(g: &NeighborGraph, n_points: usize) -> Vec<SweepPoint> {
    if !g.edges.iter().any(|e| e.phi().is_some()) {
        log::warn!("threshold sweep skipped: no edge has a defined phi");
        return Vec::new();
    }
    threshold_grid(n_points)
        .into_par_iter()
        .map(|t| sweep_point(g, t))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

impl HistogramBin {
    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Equal-width histogram over [0, 1] of arbitrary values; 1.0 lands in the
/// last bin.
pub fn histogram(values: impl IntoIterator<Item = f64>, n_bins: usize) -> Vec<HistogramBin> {
    let mut counts = vec![0usize; n_bins];
    if n_bins > 0 {
        for v in values {
            let idx = ((v * n_bins as f64).floor().max(0.0) as usize).min(n_bins - 1);
            counts[idx] += 1;
        }
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(bin, count)| HistogramBin {
            bin,
            lower: bin as f64 / n_bins as f64,
            upper: (bin + 1) as f64 / n_bins as f64,
            count,
        })
        .collect()
}

/// Histogram of defined edge φ values.
pub fn phi_histogram(g: &NeighborGraph, n_bins: usize) -> Vec<HistogramBin> {
    histogram(g.edges.iter().filter_map(|e| e.phi()), n_bins)
}

/// Centered moving average; windows are truncated at the ends.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// A plateau of equal values that is strictly higher than both neighbors
/// (array ends count as lower).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Peak {
    start: usize,
    end: usize,
    height: f64,
}

fn local_maxima(values: &[f64]) -> Vec<Peak> {
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < values.len() {
        let mut j = i;
        while j + 1 < values.len() && values[j + 1] == values[i] {
            j += 1;
        }
        let left_lower = i == 0 || values[i - 1] < values[i];
        let right_lower = j + 1 == values.len() || values[j + 1] < values[i];
        let whole = i == 0 && j + 1 == values.len();
        if left_lower && right_lower && !whole {
            peaks.push(Peak {
                start: i,
                end: j,
                height: values[i],
            });
        }
        i = j + 1;
    }
    peaks
}

/// Topographic prominence of a peak. A peak touching an end of the array is
/// measured against the other side only.
fn prominence(values: &[f64], peak: &Peak) -> f64 {
    let side_min = |side: &mut dyn Iterator<Item = &f64>| {
        side.take_while(|&&v| v <= peak.height)
            .fold(None, |m: Option<f64>, &v| Some(m.map_or(v, |m| m.min(v))))
    };
    let left = side_min(&mut values[..peak.start].iter().rev());
    let right = side_min(&mut values[peak.end + 1..].iter());
    let base = match (left, right) {
        (Some(l), Some(r)) => l.max(r),
        (Some(b), None) | (None, Some(b)) => b,
        (None, None) => peak.height,
    };
    peak.height - base
}

/// Location of the valley between the two most prominent modes of a
/// histogram, after moving-average smoothing.
///
/// Returns the center of the lowest smoothed bin strictly between the two
/// modes (the middle of the lowest run when several bins tie), or `None` when
/// fewer than two modes survive smoothing.
pub fn find_valley(hist: &[HistogramBin], smoothing_window: usize) -> Option<f64> {
    if hist.is_empty() {
        return None;
    }
    let raw: Vec<f64> = hist.iter().map(|b| b.count as f64).collect();
    let smoothed = smooth(&raw, smoothing_window.max(1));

    let mut peaks: Vec<(f64, Peak)> = local_maxima(&smoothed)
        .into_iter()
        .map(|p| (prominence(&smoothed, &p), p))
        .filter(|(prom, _)| *prom > 0.0)
        .collect();
    if peaks.len() < 2 {
        return None;
    }
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.start.cmp(&b.1.start)));
    let (first, second) = (peaks[0].1, peaks[1].1);
    let (left, right) = if first.start < second.start {
        (first, second)
    } else {
        (second, first)
    };

    let between = left.end + 1..right.start;
    if between.is_empty() {
        return None;
    }
    let lowest = between
        .clone()
        .map(|i| smoothed[i])
        .fold(f64::INFINITY, f64::min);
    let run_start = between.clone().find(|&i| smoothed[i] == lowest)?;
    let mut run_end = run_start;
    while run_end + 1 < right.start && smoothed[run_end + 1] == lowest {
        run_end += 1;
    }
    Some(0.5 * (hist[run_start].center() + hist[run_end].center()))
}

/// Users with at least one incident edge whose defined φ is ≥ the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub threshold: f64,
    pub members: BTreeSet<usize>,
}

impl CandidateSet {
    pub fn contains(&self, node: usize) -> bool {
        self.members.contains(&node)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn extract_candidates(g: &NeighborGraph, threshold: f64) -> CandidateSet {
    let members = g
        .edges
        .iter()
        .filter(|e| e.phi().is_some_and(|phi| phi >= threshold))
        .flat_map(|e| [e.u, e.v])
        .collect();
    CandidateSet { threshold, members }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::{ContingencyTable, EdgeScore, PhiScore};
    use crate::matrix::NeighborEdge;

    pub(crate) fn graph(n_nodes: usize, edges: &[(usize, usize, Option<f64>)]) -> NeighborGraph {
        NeighborGraph {
            n_nodes,
            k: 3,
            edges: edges
                .iter()
                .map(|&(u, v, phi)| NeighborEdge {
                    u,
                    v,
                    cosine: 0.5,
                    score: Some(EdgeScore {
                        table: ContingencyTable::new(0, 0, 0, 0),
                        phi: PhiScore {
                            value: phi,
                            chi_squared: phi.map(|p| p * p),
                        },
                    }),
                })
                .collect(),
        }
    }

    #[test]
    fn connected_graph_has_zero_log_ratio() {
        let g = graph(
            4,
            &[(0, 1, Some(0.3)), (1, 2, Some(0.4)), (2, 3, Some(0.9))],
        );
        let p = sweep_point(&g, 0.0);
        assert_eq!(p.n_edges, 3);
        assert_eq!(p.n_lcc_edges, 3);
        assert_eq!(p.log_ratio, Some(0.0));
        assert_eq!(p.n_components, 1);
    }

    #[test]
    fn two_equal_components() {
        let mut edges = Vec::new();
        for base in [0, 10] {
            for i in 0..5 {
                edges.push((base + i, base + i + 1, Some(0.5)));
            }
        }
        let g = graph(20, &edges);
        let p = sweep_point(&g, 0.1);
        assert_eq!(p.n_edges, 10);
        assert_eq!(p.n_lcc_edges, 5);
        assert!((p.log_ratio.unwrap() - 2f64.log10()).abs() < 1e-15);
        // two 6-node paths plus 8 isolated nodes
        assert_eq!(p.n_components, 10);
    }

    #[test]
    fn path_at_threshold() {
        let g = graph(
            4,
            &[(0, 1, Some(0.2)), (1, 2, Some(0.5)), (2, 3, Some(0.9))],
        );
        let p = sweep_point(&g, 0.6);
        assert_eq!(p.n_edges, 1);
        assert_eq!(p.n_lcc_edges, 1);
        assert_eq!(p.log_ratio, Some(0.0));
        assert_eq!(p.n_components, 3);
    }

    #[test]
    fn no_surviving_edges_has_undefined_ratio() {
        let g = graph(3, &[(0, 1, Some(0.2))]);
        let p = sweep_point(&g, 0.5);
        assert_eq!((p.n_edges, p.n_lcc_edges, p.log_ratio), (0, 0, None));
        assert_eq!(p.n_components, 3);
    }

    #[test]
    fn undefined_phi_is_never_kept() {
        let g = graph(3, &[(0, 1, None), (1, 2, Some(0.1))]);
        assert_eq!(sweep_point(&g, 0.0).n_edges, 1);
        assert_eq!(extract_candidates(&g, 0.0).members, BTreeSet::from([1, 2]));

        let undefined = graph(3, &[(0, 1, None)]);
        assert!(threshold_sweep(&undefined, 100).is_empty());
    }

    #[test]
    fn sweep_grid() {
        let g = graph(2, &[(0, 1, Some(1.0))]);
        let sweep = threshold_sweep(&g, 100);
        assert_eq!(sweep.len(), 100);
        assert_eq!(sweep[0].threshold, 0.0);
        assert!((sweep[99].threshold - 0.99).abs() < 1e-15);
    }

    #[test]
    fn histogram_examples() {
        let g = graph(3, &[(0, 1, Some(1.0)), (1, 2, Some(1.0))]);
        let h = phi_histogram(&g, 10);
        assert_eq!(h[9].count, 2);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 2);

        let g = graph(3, &[(0, 1, Some(0.05)), (1, 2, Some(0.95)), (0, 2, None)]);
        let h = phi_histogram(&g, 2);
        assert_eq!(h.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 1]);
    }

    fn bins(counts: &[usize]) -> Vec<HistogramBin> {
        let n = counts.len();
        counts
            .iter()
            .enumerate()
            .map(|(bin, &count)| HistogramBin {
                bin,
                lower: bin as f64 / n as f64,
                upper: (bin + 1) as f64 / n as f64,
                count,
            })
            .collect()
    }

    #[test]
    fn unimodal_has_no_valley() {
        let h = bins(&[1, 3, 6, 10, 14, 10, 6, 3, 1, 0]);
        assert_eq!(find_valley(&h, 5), None);
        assert_eq!(find_valley(&bins(&[4; 10]), 3), None);
    }

    #[test]
    fn symmetric_spikes_give_midpoint() {
        let mut counts = vec![0; 21];
        counts[0] = 10;
        counts[20] = 10;
        let v = find_valley(&bins(&counts), 5).unwrap();
        assert!((v - 0.5).abs() < 1e-12);

        let mut counts = vec![0; 20];
        counts[0] = 10;
        counts[19] = 10;
        let v = find_valley(&bins(&counts), 1).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn valley_between_uneven_modes() {
        let h = bins(&[2, 9, 12, 8, 4, 2, 1, 2, 5, 7, 3]);
        let v = find_valley(&h, 1).unwrap();
        assert!((v - h[6].center()).abs() < 1e-12);
    }

    #[test]
    fn candidates() {
        let g = graph(3, &[(0, 1, Some(0.7)), (1, 2, Some(0.2))]);
        assert_eq!(extract_candidates(&g, 0.67).members, BTreeSet::from([0, 1]));
        let g = graph(3, &[(0, 1, Some(0.5)), (1, 2, Some(0.66))]);
        assert!(extract_candidates(&g, 0.67).is_empty());
    }

    #[test]
    fn components_label_by_first_appearance() {
        let labels = connected_components(5, &[(3, 4), (0, 2)]);
        assert_eq!(labels, vec![0, 1, 0, 2, 2]);
    }
}
