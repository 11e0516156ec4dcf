use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{l2_norm, Scalar};

/// Column-major dense matrix over a single scalar field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    /// Wraps column-major `data`.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "DenseMatrix::new",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from row-major nested rows (convenient for literals in tests).
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Self::new(r, c, (0..c).flat_map(|j| rows.iter().map(move |row| row[j])).collect())
    }

    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self> {
        let c = columns.len();
        let r = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|col| col.len() != r) {
            return Err(Error::InvalidArgument("columns of unequal length".into()));
        }
        Self::new(r, c, columns.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[j * self.rows + i] = value;
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn column_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn conjugate_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                op: "mul",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            let col = self.matvec_unchecked(rhs.column(j));
            out.column_mut(j).copy_from_slice(&col);
        }
        Ok(out)
    }

    /// `A v`. Each output entry is summed left to right over the row, skipping
    /// zero entries of `v`.
    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "matvec",
                left: self.shape(),
                right: (v.len(), 1),
            });
        }
        Ok(self.matvec_unchecked(v))
    }

    pub(crate) fn matvec_unchecked(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        for (j, &vj) in v.iter().enumerate() {
            if vj == T::zero() {
                continue;
            }
            let col = self.column(j);
            for (o, &a) in out.iter_mut().zip(col) {
                *o += a * vj;
            }
        }
        out
    }

    /// `A p` for a real vector `p`.
    pub fn matvec_real(&self, p: &[f64]) -> Result<Vec<T>> {
        if p.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "matvec_real",
                left: self.shape(),
                right: (p.len(), 1),
            });
        }
        Ok(self.matvec_real_unchecked(p))
    }

    pub(crate) fn matvec_real_unchecked(&self, p: &[f64]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        for (j, &pj) in p.iter().enumerate() {
            if pj == 0.0 {
                continue;
            }
            let col = self.column(j);
            for (o, &a) in out.iter_mut().zip(col) {
                *o += a.scale(pj);
            }
        }
        out
    }

    /// `A* r`.
    pub fn adjoint_matvec(&self, r: &[T]) -> Result<Vec<T>> {
        if r.len() != self.rows {
            return Err(Error::DimensionMismatch {
                op: "adjoint_matvec",
                left: (self.cols, self.rows),
                right: (r.len(), 1),
            });
        }
        Ok(self.adjoint_matvec_unchecked(r))
    }

    pub(crate) fn adjoint_matvec_unchecked(&self, r: &[T]) -> Vec<T> {
        (0..self.cols)
            .map(|j| {
                let mut acc = T::zero();
                for (&a, &ri) in self.column(j).iter().zip(r) {
                    acc += a.conj() * ri;
                }
                acc
            })
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        l2_norm(&self.data)
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.cols).map(|j| l2_norm(self.column(j))).collect()
    }

    /// Scales every nonzero column to unit Euclidean norm.
    pub fn normalize_columns(&mut self) {
        for j in 0..self.cols {
            let n = l2_norm(self.column(j));
            if n > 0.0 {
                for a in self.column_mut(j) {
                    *a = a.scale(1.0 / n);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_matvec_is_identity() {
        let i3 = DenseMatrix::<f64>::identity(3);
        assert_eq!(i3.matvec(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn zero_matrix_annihilates() {
        let z = DenseMatrix::<f64>::zeros(2, 3);
        assert_eq!(z.matvec(&[4.0, -1.0, 7.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn matvec_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DenseMatrix::from_fn(4, 4, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let v: Vec<Complex64> = (0..4)
            .map(|_| Complex64::new(rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let got = a.matvec(&v).unwrap();
        for i in 0..4 {
            let mut re = 0.0;
            let mut im = 0.0;
            for j in 0..4 {
                let (ar, ai) = (a.get(i, j).re, a.get(i, j).im);
                re += ar * v[j].re - ai * v[j].im;
                im += ar * v[j].im + ai * v[j].re;
            }
            assert!((got[i].re - re).abs() < 1e-14 && (got[i].im - im).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch_reports_shapes() {
        let a = DenseMatrix::<f64>::zeros(2, 3);
        match a.matvec(&[1.0, 2.0]) {
            Err(Error::DimensionMismatch { left, right, .. }) => {
                assert_eq!(left, (2, 3));
                assert_eq!(right, (2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn conjugate_transpose_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DenseMatrix::from_fn(3, 5, |_, _| Complex64::new(rng.random(), rng.random()));
        assert_eq!(a.conjugate_transpose().conjugate_transpose(), a);
        assert_eq!(a.mul(&DenseMatrix::identity(5)).unwrap(), a);
    }

    #[test]
    fn adjoint_matches_explicit_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DenseMatrix::from_fn(3, 4, |_, _| Complex64::new(rng.random(), rng.random()));
        let r: Vec<Complex64> = (0..3).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let lhs = a.adjoint_matvec(&r).unwrap();
        let rhs = a.conjugate_transpose().matvec(&r).unwrap();
        for (x, y) in lhs.iter().zip(&rhs) {
            assert!((x - y).norm() < 1e-14);
        }
    }
}
