use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::{dot, Scalar};

/// Relative rank tolerance: a pivot below `DEFAULT_RANK_TOL * ||B||_F` is
/// treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Householder QR of a tall matrix, kept around so the reverse pass can
/// reuse it for normal-equation solves.
#[derive(Clone, Debug)]
pub struct QrFactor<T> {
    rows: usize,
    cols: usize,
    // Householder vectors, stored per column, each of length rows - j.
    reflectors: Vec<Vec<T>>,
    // Squared norms of the reflectors (0 means identity reflector).
    reflector_norms: Vec<f64>,
    // Upper triangle, column-major, cols x cols.
    r: Vec<T>,
}

impl<T: Scalar> QrFactor<T> {
    pub fn new(b: &DenseMatrix<T>) -> Result<Self> {
        Self::with_tol(b, DEFAULT_RANK_TOL)
    }

    pub fn with_tol(b: &DenseMatrix<T>, rank_tol: f64) -> Result<Self> {
        let (m, n) = b.shape();
        if m < n {
            return Err(Error::InvalidArgument(format!(
                "least squares needs rows >= cols, got {m}x{n}"
            )));
        }
        let tol = rank_tol * b.frobenius_norm();
        let mut work: Vec<Vec<T>> = (0..n).map(|j| b.column(j).to_vec()).collect();
        let mut reflectors = Vec::with_capacity(n);
        let mut reflector_norms = Vec::with_capacity(n);
        let mut r = vec![T::zero(); n * n];

        for j in 0..n {
            let x = &work[j][j..];
            let norm = x.iter().map(|v| v.modulus_sq()).sum::<f64>().sqrt();
            let x0 = x[0];
            let x0_abs = x0.modulus();
            // alpha = -phase(x0) * ||x|| keeps v0 = x0 - alpha free of cancellation.
            let phase = if x0_abs > 0.0 {
                x0.scale(1.0 / x0_abs)
            } else {
                T::one()
            };
            let alpha = -(phase.scale(norm));
            let mut v = x.to_vec();
            v[0] -= alpha;
            let vnorm_sq = v.iter().map(|t| t.modulus_sq()).sum::<f64>();

            if norm <= tol || !norm.is_finite() {
                return Err(Error::RankDeficient {
                    index: j,
                    pivot: norm,
                    tol,
                });
            }

            for i in 0..j {
                r[j * n + i] = work[j][i];
            }
            r[j * n + j] = alpha;

            for col in work.iter_mut().skip(j + 1) {
                apply_reflector(&v, vnorm_sq, &mut col[j..]);
            }
            reflectors.push(v);
            reflector_norms.push(vnorm_sq);
        }

        Ok(Self {
            rows: m,
            cols: n,
            reflectors,
            reflector_norms,
            r,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Diagonal of R.
    pub fn diagonal(&self) -> Vec<T> {
        (0..self.cols).map(|j| self.r[j * self.cols + j]).collect()
    }

    /// Minimizer of `||y - B z||`.
    pub fn solve(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch {
                op: "least_squares",
                left: (self.rows, self.cols),
                right: (y.len(), 1),
            });
        }
        let mut qy = y.to_vec();
        for (j, (v, &vn)) in self.reflectors.iter().zip(&self.reflector_norms).enumerate() {
            apply_reflector(v, vn, &mut qy[j..]);
        }
        Ok(self.back_substitute(&qy[..self.cols]))
    }

    /// Solves `(B* B) s = g` through `R* R s = g`.
    pub fn solve_normal(&self, g: &[T]) -> Vec<T> {
        let n = self.cols;
        // R* t = g (forward substitution).
        let mut t = vec![T::zero(); n];
        for i in 0..n {
            let mut acc = g[i];
            for k in 0..i {
                acc -= self.r[i * n + k].conj() * t[k];
            }
            t[i] = acc / self.r[i * n + i].conj();
        }
        self.back_substitute(&t)
    }

    fn back_substitute(&self, rhs: &[T]) -> Vec<T> {
        let n = self.cols;
        let mut z = rhs.to_vec();
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in i + 1..n {
                acc -= self.r[k * n + i] * z[k];
            }
            z[i] = acc / self.r[i * n + i];
        }
        z
    }
}

fn apply_reflector<T: Scalar>(v: &[T], vnorm_sq: f64, x: &mut [T]) {
    if vnorm_sq == 0.0 {
        return;
    }
    let coeff = dot(v, x).scale(2.0 / vnorm_sq);
    for (xi, &vi) in x.iter_mut().zip(v) {
        *xi -= vi * coeff;
    }
}

/// Least-squares solve via Householder QR with the default rank tolerance.
pub fn least_squares<T: Scalar>(b: &DenseMatrix<T>, y: &[T]) -> Result<Vec<T>> {
    QrFactor::new(b)?.solve(y)
}

pub fn least_squares_with_tol<T: Scalar>(
    b: &DenseMatrix<T>,
    y: &[T],
    rank_tol: f64,
) -> Result<Vec<T>> {
    QrFactor::with_tol(b, rank_tol)?.solve(y)
}
