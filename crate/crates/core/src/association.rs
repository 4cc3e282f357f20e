//! 2×2 contingency tables and the φ association coefficient for neighbor
//! pairs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::matrix::{NeighborGraph, SparseBinaryMatrix};

/// Joint share counts of two users over the tweet universe.
///
/// `a`: both shared, `b`: only the first, `c`: only the second, `d`: neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }

    pub fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    /// Row and column marginals `(a+b, c+d, a+c, b+d)`.
    pub fn marginals(&self) -> [u64; 4] {
        let Self { a, b, c, d } = *self;
        [a + b, c + d, a + c, b + d]
    }
}

/// φ and the equivalent χ² statistic. Both are `None` when a marginal is
/// zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiScore {
    pub value: Option<f64>,
    pub chi_squared: Option<f64>,
}

impl PhiScore {
    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }
}

/// Association attached to a scored neighbor edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeScore {
    pub table: ContingencyTable,
    pub phi: PhiScore,
}

/// Builds the contingency table of rows `u1` and `u2`.
pub fn contingency(m: &SparseBinaryMatrix, u1: usize, u2: usize) -> Result<ContingencyTable> {
    if u1 == u2 {
        return Err(Error::SelfComparison(u1));
    }
    for u in [u1, u2] {
        if u >= m.n_rows() {
            return Err(Error::Dimension(format!(
                "row {u} out of range for {} rows",
                m.n_rows()
            )));
        }
    }
    let a = m.overlap(u1, u2) as u64;
    let b = m.row_len(u1) as u64 - a;
    let c = m.row_len(u2) as u64 - a;
    let d = m.n_cols() as u64 - a - b - c;
    Ok(ContingencyTable { a, b, c, d })
}

fn cross_difference(t: &ContingencyTable) -> f64 {
    (t.a as i128 * t.d as i128 - t.b as i128 * t.c as i128) as f64
}

/// φ = |ad − bc| / √((a+b)(c+d)(a+c)(b+d)), with χ² = n·φ².
pub fn phi(t: &ContingencyTable) -> PhiScore {
    let marginals = t.marginals();
    if marginals.contains(&0) {
        return PhiScore {
            value: None,
            chi_squared: None,
        };
    }
    let product: f64 = marginals.iter().map(|&m| m as f64).product();
    let diff = cross_difference(t);
    let value = (diff.abs() / product.sqrt()).min(1.0);
    let chi_squared = t.n() as f64 * (diff * diff) / product;
    PhiScore {
        value: Some(value),
        chi_squared: Some(chi_squared),
    }
}

/// |ad − bc| / √(a·b·c·d), the cell-product variant. Undefined whenever any
/// cell is zero. Kept for comparing histogram shapes only; nothing in the
/// pipeline thresholds on it.
pub fn phi_cell_product(t: &ContingencyTable) -> Option<f64> {
    let cells = [t.a, t.b, t.c, t.d];
    if cells.contains(&0) {
        return None;
    }
    let product: f64 = cells.iter().map(|&x| x as f64).product();
    Some(cross_difference(t).abs() / product.sqrt())
}

/// Scores every edge of `g` against `m`.
pub fn score_graph(g: &NeighborGraph, m: &SparseBinaryMatrix) -> Result<NeighborGraph> {
    if g.n_nodes != m.n_rows() {
        return Err(Error::Dimension(format!(
            "graph has {} nodes but matrix has {} rows",
            g.n_nodes,
            m.n_rows()
        )));
    }
    let edges = g
        .edges
        .par_iter()
        .map(|e| {
            let table = contingency(m, e.u, e.v)?;
            let mut scored = e.clone();
            scored.score = Some(EdgeScore {
                table,
                phi: phi(&table),
            });
            Ok(scored)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NeighborGraph {
        n_nodes: g.n_nodes,
        k: g.k,
        edges,
    })
}

/// Upper-tail quantile of χ² with one degree of freedom: the `q` with
/// P(X > q) = `tail`.
///
/// For one degree of freedom P(X > q) = erfc(√(q/2)), so q = 2·erfc⁻¹(tail)².
/// The closed form is refined by bisection whenever it misses the target
/// tail probability by more than 1e-9 relative.
pub fn chi2_1_upper_quantile(tail: f64) -> Result<f64> {
    if !(tail > 0.0 && tail <= 1.0) {
        return Err(Error::Config(format!(
            "tail probability must lie in (0, 1], got {tail}"
        )));
    }
    let survival = |q: f64| erfc((q / 2.0).sqrt());
    let x = erfc_inv(tail);
    let q = 2.0 * x * x;
    if (survival(q) - tail).abs() <= 1e-9 * tail {
        return Ok(q);
    }

    let (mut lo, mut hi) = (0.0f64, q.max(1.0));
    while survival(hi) > tail {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if survival(mid) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Critical φ for significance `alpha`, Bonferroni corrected over
/// `m_comparisons` tests on tables of size `n`.
pub fn critical_phi(alpha: f64, m_comparisons: u64, n: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if m_comparisons == 0 || n == 0 {
        return Err(Error::Config(
            "comparison count and table size must be positive".into(),
        ));
    }
    let q = chi2_1_upper_quantile(alpha / m_comparisons as f64)?;
    Ok((q / n as f64).sqrt())
}
