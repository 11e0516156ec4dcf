use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Strictly increasing indices into `[0, ambient_dim)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SupportSet {
    indices: Vec<usize>,
    ambient_dim: usize,
}

impl SupportSet {
    /// Sorts and validates; duplicates are rejected.
    pub fn new(mut indices: Vec<usize>, ambient_dim: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(&bad) = indices.iter().find(|&&i| i >= ambient_dim) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                dim: ambient_dim,
            });
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("support has duplicate indices".into()));
        }
        Ok(Self {
            indices,
            ambient_dim,
        })
    }

    pub fn empty(ambient_dim: usize) -> Self {
        Self {
            indices: Vec::new(),
            ambient_dim,
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self {
            indices: (0..ambient_dim).collect(),
            ambient_dim,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &SupportSet) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }

    /// 1-based indices, for reports.
    pub fn one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }

    /// Support of the nonzero entries of `x`.
    pub fn of_vector<T: Scalar>(x: &[T]) -> Self {
        Self {
            indices: (0..x.len()).filter(|&i| x[i] != T::zero()).collect(),
            ambient_dim: x.len(),
        }
    }

    /// Restriction `x_S`.
    pub fn restrict<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                op: "restrict",
                left: (self.ambient_dim, 1),
                right: (x.len(), 1),
            });
        }
        Ok(self.indices.iter().map(|&i| x[i]).collect())
    }
}

impl<T: Scalar> DenseMatrix<T> {
    /// Submatrix of the columns listed in `s`.
    pub fn restrict_columns(&self, s: &SupportSet) -> Result<Self> {
        if s.ambient_dim() != self.cols() {
            return Err(Error::DimensionMismatch {
                op: "restrict_columns",
                left: self.shape(),
                right: (s.ambient_dim(), 1),
            });
        }
        self.select_columns(s.indices())
    }

    /// Columns in the given order (selection order matters for OMP).
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&j| j >= self.cols()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                dim: self.cols(),
            });
        }
        let data: Vec<T> = cols.iter().flat_map(|&j| self.column(j).to_vec()).collect();
        Self::new(self.rows(), cols.len().max(1), data).or_else(|_| {
            Err(Error::InvalidArgument("cannot select an empty column set".into()))
        })
    }
}

/// Zero-padded vector of length `n` carrying `xs` on `s`.
pub fn embed<T: Scalar>(xs: &[T], s: &SupportSet, n: usize) -> Result<Vec<T>> {
    if xs.len() != s.len() {
        return Err(Error::DimensionMismatch {
            op: "embed",
            left: (s.len(), 1),
            right: (xs.len(), 1),
        });
    }
    if let Some(&bad) = s.indices().iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, dim: n });
    }
    let mut out = vec![T::zero(); n];
    for (&i, &v) in s.indices().iter().zip(xs) {
        out[i] = v;
    }
    Ok(out)
}
