//! Exact sorting, permutation matrices and the softsort relaxation.
//!
//! Indices are 0-based; `one_based` renders them for reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Descending argsort: `order[i]` is the index of the i-th largest entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    pub order: Vec<usize>,
}

impl Permutation {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `P v`, i.e. `v` reordered by `order`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&j| v[j]).collect()
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.order.iter().map(|j| j + 1).collect()
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.order.len()];
        for &j in &self.order {
            if j >= seen.len() || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        true
    }
}

/// Stable descending argsort; ties keep the lower index first.
pub fn argsort_desc(v: &[f64]) -> Permutation {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| {
        v[b].partial_cmp(&v[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Permutation { order }
}

/// Non-increasing copy of `v`.
pub fn sort_desc(v: &[f64]) -> Vec<f64> {
    argsort_desc(v).apply(v)
}

/// Permutation matrix in compressed form: row `i` is `e_{order[i]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationMatrix {
    pub perm: Permutation,
}

impl PermutationMatrix {
    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        let mut r = vec![0.0; self.dim()];
        r[self.perm.order[i]] = 1.0;
        r
    }

    pub fn to_dense(&self) -> DenseMatrix<f64> {
        let n = self.dim();
        DenseMatrix::from_fn(n, n, |i, j| if self.perm.order[i] == j { 1.0 } else { 0.0 })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.perm.apply(v)
    }
}

pub fn permutation_matrix(v: &[f64]) -> PermutationMatrix {
    PermutationMatrix {
        perm: argsort_desc(v),
    }
}

/// Row-stochastic relaxation of a permutation matrix, tagged with its temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftPermutation {
    pub matrix: DenseMatrix<f64>,
    pub tau: f64,
}

impl SoftPermutation {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.matrix.cols()).map(|j| self.matrix.get(i, j)).collect()
    }

    /// Column index of the largest entry in each row (lowest index on ties).
    pub fn row_argmax(&self) -> Vec<usize> {
        (0..self.dim()).map(|i| argmax(&self.row(i))).collect()
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = j;
        }
    }
    best
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("temperature must be positive, got {tau}")))
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument("sort target has non-finite entries".into()))
    }
}

/// `softmax(-|pivot - v| / tau)` with max subtraction. Every softsort row,
/// the first-row shortcut and the gradient tape go through this function.
pub(crate) fn softmax_row(v: &[f64], pivot: f64, tau: f64) -> Vec<f64> {
    let inv_tau = 1.0 / tau;
    let mut z: Vec<f64> = v.iter().map(|&x| -(pivot - x).abs() * inv_tau).collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for zj in z.iter_mut() {
        let d = *zj - m;
        *zj = if d < EXP_CUTOFF { 0.0 } else { d.exp() };
        total += *zj;
    }
    let inv_total = 1.0 / total;
    for zj in z.iter_mut() {
        *zj *= inv_total;
    }
    z
}

/// `exp(-37) < 2^-53`: past this point a term is below the rounding unit of a
/// row sum that already contains the pivot's `exp(0) = 1`.
const EXP_CUTOFF: f64 = -37.0;

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&x| (x - m).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

pub fn softsort(v: &[f64], tau: f64) -> Result<SoftPermutation> {
    check_tau(tau)?;
    check_finite(v)?;
    let n = v.len();
    let sorted = sort_desc(v);
    let mut matrix = DenseMatrix::zeros(n, n);
    for (i, &s) in sorted.iter().enumerate() {
        for (j, p) in softmax_row(v, s, tau).into_iter().enumerate() {
            matrix.set(i, j, p);
        }
    }
    Ok(SoftPermutation { matrix, tau })
}

/// Row 1 of `softsort(v, tau)` in O(N) memory.
pub fn softsort_first_row(v: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    check_finite(v)?;
    if v.is_empty() {
        return Ok(Vec::new());
    }
    let pivot = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(softmax_row(v, pivot, tau))
}

/// The first `k` rows of `softsort(v, tau)`.
pub fn softsort_top_rows(v: &[f64], tau: f64, k: usize) -> Result<Vec<Vec<f64>>> {
    check_tau(tau)?;
    check_finite(v)?;
    check_k(k, v.len())?;
    let perm = argsort_desc(v);
    Ok(perm.order[..k]
        .iter()
        .map(|&j| softmax_row(v, v[j], tau))
        .collect())
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        Err(Error::InvalidArgument(format!("k = {k} outside [1, {n}]")))
    } else {
        Ok(())
    }
}

/// Anything that can hand out rows of an N x N (soft) permutation.
pub trait RowSource {
    fn dim(&self) -> usize;
    fn row(&self, i: usize) -> Vec<f64>;
}

impl RowSource for PermutationMatrix {
    fn dim(&self) -> usize {
        PermutationMatrix::dim(self)
    }
    fn row(&self, i: usize) -> Vec<f64> {
        PermutationMatrix::row(self, i)
    }
}

impl RowSource for SoftPermutation {
    fn dim(&self) -> usize {
        SoftPermutation::dim(self)
    }
    fn row(&self, i: usize) -> Vec<f64> {
        SoftPermutation::row(self, i)
    }
}

/// Sum of rows in order, accumulated left to right.
pub(crate) fn sum_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut q = rows[0].clone();
    for r in &rows[1..] {
        for (qj, rj) in q.iter_mut().zip(r) {
            *qj += rj;
        }
    }
    q
}

/// Sum of the first `k` rows.
pub fn top_k_mask<P: RowSource + ?Sized>(p: &P, k: usize) -> Result<Vec<f64>> {
    check_k(k, p.dim())?;
    let rows: Vec<Vec<f64>> = (0..k).map(|i| p.row(i)).collect();
    Ok(sum_rows(&rows))
}
