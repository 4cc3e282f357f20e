//! Latent sharing space: the incidence matrix centered under the
//! user/tweet independence model, and its truncated SVD.
//!
//! The centered matrix δ(u, t) = obs(u, t) − n_user(u)·n_tweet(t)/n_total is
//! dense, so it is only ever applied as an operator. The SVD is computed by
//! block subspace iteration with a Rayleigh–Ritz step on every sweep; each
//! sweep costs one block product with δ and one with δᵀ.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SparseBinaryMatrix;

/// Implicit double-centered view of a binary incidence matrix.
#[derive(Debug, Clone)]
pub struct CenteredOperator<'a> {
    base: &'a SparseBinaryMatrix,
    row_totals: Vec<f64>,
    col_totals: Vec<f64>,
    grand_total: f64,
}

impl<'a> CenteredOperator<'a> {
    pub fn new(base: &'a SparseBinaryMatrix) -> Result<Self> {
        if base.nnz() == 0 {
            return Err(Error::InvalidData(
                "cannot center a matrix without entries".into(),
            ));
        }
        Ok(Self {
            base,
            row_totals: (0..base.n_rows()).map(|i| base.row_len(i) as f64).collect(),
            col_totals: (0..base.n_cols()).map(|j| base.col_len(j) as f64).collect(),
            grand_total: base.nnz() as f64,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.base.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.base.n_cols()
    }

    pub fn row_totals(&self) -> &[f64] {
        &self.row_totals
    }

    pub fn col_totals(&self) -> &[f64] {
        &self.col_totals
    }

    pub fn grand_total(&self) -> f64 {
        self.grand_total
    }

    /// δ·x for x indexed by tweet.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols() {
            return Err(Error::Dimension(format!(
                "vector of length {} applied to operator with {} columns",
                x.len(),
                self.n_cols()
            )));
        }
        let shift = dot(&self.col_totals, x) / self.grand_total;
        Ok((0..self.n_rows())
            .into_par_iter()
            .map(|i| {
                let obs: f64 = self.base.row(i).iter().map(|&j| x[j as usize]).sum();
                obs - shift * self.row_totals[i]
            })
            .collect())
    }

    /// δᵀ·y for y indexed by user.
    pub fn rmatvec(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n_rows() {
            return Err(Error::Dimension(format!(
                "vector of length {} applied to transposed operator with {} rows",
                y.len(),
                self.n_rows()
            )));
        }
        let shift = dot(&self.row_totals, y) / self.grand_total;
        Ok((0..self.n_cols())
            .into_par_iter()
            .map(|j| {
                let obs: f64 = self.base.col(j).iter().map(|&i| y[i as usize]).sum();
                obs - shift * self.col_totals[j]
            })
            .collect())
    }

    /// Dense δ; only meant for small instances and tests.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut dense = DMatrix::from_fn(self.n_rows(), self.n_cols(), |i, j| {
            -self.row_totals[i] * self.col_totals[j] / self.grand_total
        });
        for i in 0..self.n_rows() {
            for &j in self.base.row(i) {
                dense[(i, j as usize)] += 1.0;
            }
        }
        dense
    }

    fn apply_block(&self, block: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let cols = block
            .column_iter()
            .map(|c| self.matvec(c.as_slice()))
            .collect::<Result<Vec<_>>>()?;
        Ok(from_columns(self.n_rows(), &cols))
    }

    fn apply_block_transposed(&self, block: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let cols = block
            .column_iter()
            .map(|c| self.rmatvec(c.as_slice()))
            .collect::<Result<Vec<_>>>()?;
        Ok(from_columns(self.n_cols(), &cols))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn from_columns(n_rows: usize, cols: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(n_rows, cols.len(), |i, j| cols[j][i])
}

/// How user scores and tweet loadings are scaled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreScaling {
    /// Singular vectors multiplied by their singular values.
    #[default]
    Singular,
    /// Raw unit-norm singular vectors.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvdOptions {
    pub rank: usize,
    pub seed: u64,
    /// Convergence when every retained triplet's residual
    /// ‖δᵀu − σv‖ is at most `tol · σ₁`.
    pub tol: f64,
    pub max_iter: usize,
    /// Extra subspace columns beyond `rank`.
    pub oversample: usize,
    pub scaling: ScoreScaling,
}

impl Default for SvdOptions {
    fn default() -> Self {
        Self {
            rank: 3,
            seed: 0,
            tol: 1e-8,
            max_iter: 1000,
            oversample: 10,
            scaling: ScoreScaling::Singular,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSpace {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// Unit-norm left singular vectors, one row per user.
    pub left_vectors: Vec<Vec<f64>>,
    /// Unit-norm right singular vectors, one row per tweet.
    pub right_vectors: Vec<Vec<f64>>,
    /// Per-user coordinates after applying the scaling convention.
    pub user_scores: Vec<Vec<f64>>,
    /// Per-tweet coordinates after applying the scaling convention.
    pub tweet_loadings: Vec<Vec<f64>>,
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

impl LatentSpace {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }
}

/// Orthonormalizes the columns of `q` in place with two passes of modified
/// Gram–Schmidt. Columns that collapse are replaced by fresh random
/// directions drawn from `rng`.
fn orthonormalize(q: &mut DMatrix<f64>, rng: &mut ChaCha8Rng) {
    let (n, p) = q.shape();
    for j in 0..p {
        let mut attempts = 0;
        loop {
            let original = q.column(j).norm();
            for _ in 0..2 {
                for i in 0..j {
                    let proj = q.column(i).dot(&q.column(j));
                    let qi = q.column(i).clone_owned();
                    q.column_mut(j).axpy(-proj, &qi, 1.0);
                }
            }
            let norm = q.column(j).norm();
            if norm > 1e-10 * original.max(f64::MIN_POSITIVE) && norm > 0.0 {
                q.column_mut(j).scale_mut(1.0 / norm);
                break;
            }
            attempts += 1;
            assert!(
                attempts < 100,
                "unable to extend orthonormal basis in dimension {n}"
            );
            for i in 0..n {
                q[(i, j)] = StandardNormal.sample(rng);
            }
        }
    }
}

/// Flips signs so that each left singular vector's largest-magnitude entry
/// (first one on ties) is positive; the matching right vector follows.
fn fix_signs(left: &mut DMatrix<f64>, right: &mut DMatrix<f64>) {
    for j in 0..left.ncols() {
        let mut best = 0;
        for i in 1..left.nrows() {
            if left[(i, j)].abs() > left[(best, j)].abs() {
                best = i;
            }
        }
        if left[(best, j)] < 0.0 {
            left.column_mut(j).neg_mut();
            right.column_mut(j).neg_mut();
        }
    }
}

fn rows_of(m: &DMatrix<f64>, scale: Option<&[f64]>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| m[(i, j)] * scale.map_or(1.0, |s| s[j]))
                .collect()
        })
        .collect()
}

/// Top-`rank` singular triplets of the centered operator.
pub fn truncated_svd(op: &CenteredOperator<'_>, opts: &SvdOptions) -> Result<LatentSpace> {
    let (n_rows, n_cols) = (op.n_rows(), op.n_cols());
    let max_rank = n_rows.min(n_cols);
    if opts.rank == 0 || opts.rank > max_rank {
        return Err(Error::Config(format!(
            "rank {} must lie in 1..={max_rank} for a {n_rows}x{n_cols} matrix",
            opts.rank
        )));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 || opts.max_iter == 0 {
        return Err(Error::Config(
            "SVD tolerance and iteration cap must be positive".into(),
        ));
    }
    let r = opts.rank;
    let p = (r + opts.oversample).min(max_rank);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q = DMatrix::from_fn(n_cols, p, |_, _| StandardNormal.sample(&mut rng));
    orthonormalize(&mut q, &mut rng);

    let mut residuals = vec![f64::INFINITY; r];
    for iteration in 1..=opts.max_iter {
        let b = op.apply_block(&q)?;
        let svd = b.svd(true, true);
        let (u_small, v_t_small) = (svd.u.unwrap(), svd.v_t.unwrap());

        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&x, &y| {
            svd.singular_values[y]
                .total_cmp(&svd.singular_values[x])
                .then(x.cmp(&y))
        });
        let sigma: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
        let u = DMatrix::from_fn(n_rows, p, |i, j| u_small[(i, order[j])]);
        let v_small = DMatrix::from_fn(p, p, |i, j| v_t_small[(order[j], i)]);
        let v = &q * v_small;

        // δᵀu_i should equal σ_i v_i for a converged triplet
        let w = op.apply_block_transposed(&u)?;
        let scale = sigma[0].max(f64::MIN_POSITIVE);
        for i in 0..r {
            let mut diff = w.column(i).clone_owned();
            diff.axpy(-sigma[i], &v.column(i), 1.0);
            residuals[i] = diff.norm() / scale;
        }

        if residuals.iter().all(|&res| res <= opts.tol) {
            let mut left = u.columns(0, r).clone_owned();
            let mut right = v.columns(0, r).clone_owned();
            fix_signs(&mut left, &mut right);
            let sigma = sigma[..r].to_vec();
            let scale = match opts.scaling {
                ScoreScaling::Singular => Some(sigma.as_slice()),
                ScoreScaling::Unit => None,
            };
            return Ok(LatentSpace {
                user_scores: rows_of(&left, scale),
                tweet_loadings: rows_of(&right, scale),
                left_vectors: rows_of(&left, None),
                right_vectors: rows_of(&right, None),
                singular_values: sigma,
                iterations: iteration,
                residuals,
            });
        }

        q = w;
        orthonormalize(&mut q, &mut rng);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residuals,
    })
}

/// One row of the scree table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreeEntry {
    pub dimension: usize,
    pub singular_value: f64,
    pub variance_fraction: f64,
}

/// Share of Σσ² carried by each computed dimension.
pub fn scree(singular_values: &[f64]) -> Vec<ScreeEntry> {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    singular_values
        .iter()
        .enumerate()
        .map(|(i, &s)| ScreeEntry {
            dimension: i + 1,
            singular_value: s,
            variance_fraction: if total > 0.0 { s * s / total } else { 0.0 },
        })
        .collect()
}

/// Rows scaled to unit Euclidean norm, plus the indices of all-zero rows
/// (left as zero).
pub fn l2_normalize_rows(scores: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut zero_rows = Vec::new();
    let normalized = scores
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                zero_rows.push(i);
                row.clone()
            } else {
                row.iter().map(|x| x / norm).collect()
            }
        })
        .collect();
    (normalized, zero_rows)
}
