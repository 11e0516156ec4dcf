//! Per-iteration building blocks shared by the solvers and the gradient tape,
//! so both produce bit-identical forward values.

use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// `y - A x`.
pub(crate) fn residual<T: Scalar>(a: &DenseMatrix<T>, y: &[T], x: &[T]) -> Vec<T> {
    let ax = a.matvec_unchecked(x);
    y.iter().zip(ax).map(|(&yi, axi)| yi - axi).collect()
}

/// `x + eta c`.
pub(crate) fn gradient_step<T: Scalar>(x: &[T], c: &[T], eta: f64) -> Vec<T> {
    x.iter().zip(c).map(|(&xi, &ci)| xi + ci.scale(eta)).collect()
}

/// `w ⊙ a`, or `a` itself without weights.
pub(crate) fn weighted(a: &[f64], w: Option<&[f64]>) -> Vec<f64> {
    match w {
        Some(w) => w.iter().zip(a).map(|(wj, aj)| wj * aj).collect(),
        None => a.to_vec(),
    }
}

/// `sum_i z_i p_i` for real rows `p_i`, accumulated in row order.
pub(crate) fn combine<T: Scalar>(z: &[T], rows: &[Vec<f64>], n: usize) -> Vec<T> {
    let mut x = vec![T::zero(); n];
    for (zi, p) in z.iter().zip(rows) {
        for (xj, &pj) in x.iter_mut().zip(p) {
            if pj != 0.0 {
                *xj += zi.scale(pj);
            }
        }
    }
    x
}

/// `q ⊙ u`.
pub(crate) fn hadamard<T: Scalar>(q: &[f64], u: &[T]) -> Vec<T> {
    q.iter().zip(u).map(|(&qj, &uj)| uj.scale(qj)).collect()
}
