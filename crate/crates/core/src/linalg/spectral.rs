use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SupportSet};
use crate::scalar::{dot, l2_norm, Scalar};

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

/// Largest number of supports the exact RIC scan will visit.
pub const MAX_EXACT_SUPPORTS: u128 = 1_000_000;

/// Spectral norm by power iteration on `A* A`, started from the normalized
/// all-ones vector so the result is reproducible bit for bit.
pub fn operator_norm<T: Scalar>(a: &DenseMatrix<T>) -> Result<f64> {
    let n = a.cols();
    let start = vec![T::from_real(1.0 / (n as f64).sqrt()); n];
    match power_iteration(a, start)? {
        Some(rho) => Ok(rho.sqrt()),
        None => {
            // All-ones lies in the null space; restart on the heaviest column.
            let norms = a.column_norms();
            let (j, &best) = norms
                .iter()
                .enumerate()
                .fold((0, &0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best == 0.0 {
                return Ok(0.0);
            }
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            Ok(power_iteration(a, e)?.unwrap_or(0.0).sqrt())
        }
    }
}

fn power_iteration<T: Scalar>(a: &DenseMatrix<T>, mut x: Vec<T>) -> Result<Option<f64>> {
    let mut prev = f64::NAN;
    let mut rho = 0.0;
    for it in 0..POWER_MAX_ITER {
        let ax = a.matvec_unchecked(&x);
        let y = a.adjoint_matvec_unchecked(&ax);
        let new_rho = dot(&x, &y).re();
        let ny = l2_norm(&y);
        if ny == 0.0 {
            return Ok(if it == 0 { None } else { Some(0.0) });
        }
        prev = rho;
        rho = new_rho;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi.scale(1.0 / ny);
        }
        if it > 0 && (rho - prev).abs() <= POWER_TOL * rho.abs() {
            return Ok(Some(rho));
        }
    }
    Err(Error::NoConvergence {
        previous: prev,
        last: rho,
    })
}

/// Eigenvalues of a Hermitian matrix in ascending order (cyclic Jacobi on
/// the real symmetric embedding `[[X, -Y], [Y, X]]` for complex input).
pub fn hermitian_eigenvalues<T: Scalar>(h: &DenseMatrix<T>) -> Result<Vec<f64>> {
    let n = h.rows();
    if h.cols() != n {
        return Err(Error::InvalidArgument("eigenvalues need a square matrix".into()));
    }
    let dim = if T::IS_COMPLEX { 2 * n } else { n };
    let mut m = vec![0.0; dim * dim];
    for i in 0..n {
        for j in 0..n {
            let v = h.get(i, j);
            m[i * dim + j] = v.re();
            if T::IS_COMPLEX {
                m[(i + n) * dim + j + n] = v.re();
                m[(i + n) * dim + j] = v.im();
                m[i * dim + j + n] = -v.im();
            }
        }
    }
    let mut eig = symmetric_jacobi(&mut m, dim);
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    if T::IS_COMPLEX {
        // every eigenvalue appears twice in the embedding
        eig = eig.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect();
    }
    Ok(eig)
}

fn symmetric_jacobi(m: &mut [f64], n: usize) -> Vec<f64> {
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}

fn gram<T: Scalar>(a: &DenseMatrix<T>, cols: &[usize]) -> DenseMatrix<T> {
    DenseMatrix::from_fn(cols.len(), cols.len(), |i, j| {
        dot(a.column(cols[i]), a.column(cols[j]))
    })
}

/// Singular values in descending order.
pub fn singular_values<T: Scalar>(a: &DenseMatrix<T>) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..a.cols()).collect();
    let g = if a.cols() <= a.rows() {
        gram(a, &all)
    } else {
        gram(&a.conjugate_transpose(), &(0..a.rows()).collect::<Vec<_>>())
    };
    let mut sv: Vec<f64> = hermitian_eigenvalues(&g)?
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    sv.reverse();
    Ok(sv)
}

/// Largest modulus of an inner product between two distinct columns.
pub fn coherence<T: Scalar>(a: &DenseMatrix<T>) -> Result<f64> {
    if a.cols() < 2 {
        return Err(Error::InvalidArgument(
            "coherence needs at least two columns".into(),
        ));
    }
    if let Some(j) = (0..a.cols()).find(|&j| l2_norm(a.column(j)) == 0.0) {
        return Err(Error::InvalidArgument(format!("column {j} is zero")));
    }
    let mut mu = 0.0f64;
    for i in 0..a.cols() {
        for j in i + 1..a.cols() {
            mu = mu.max(dot(a.column(i), a.column(j)).modulus());
        }
    }
    Ok(mu)
}

/// `||I - eta A* A||`.
pub fn shifted_gram_norm<T: Scalar>(a: &DenseMatrix<T>, eta: f64) -> Result<f64> {
    if a.cols() > a.rows() {
        // A* A is singular: its spectrum is {0} plus values up to ||A||^2.
        let top = operator_norm(a)?.powi(2);
        return Ok((1.0 - eta * top).abs().max(1.0));
    }
    let n = a.cols();
    let mut m = DenseMatrix::<T>::identity(n);
    for i in 0..n {
        for j in 0..n {
            let g = dot(a.column(i), a.column(j));
            m.set(i, j, m.get(i, j) - g.scale(eta));
        }
    }
    operator_norm(&m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum RicMode {
    Exact,
    MonteCarlo { n_samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RicEstimate {
    pub delta: f64,
    pub sparsity: usize,
    /// True when only a sample of supports was scanned.
    pub lower_bound: bool,
    pub supports_scanned: usize,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return acc;
        }
    }
    acc
}

fn support_distortion<T: Scalar>(a: &DenseMatrix<T>, cols: &[usize]) -> Result<f64> {
    let eig = hermitian_eigenvalues(&gram(a, cols))?;
    let lo = eig[0];
    let hi = eig[eig.len() - 1];
    Ok((hi - 1.0).abs().max((1.0 - lo).abs()))
}

/// Restricted isometry constant of order `s`, exactly or from random supports.
pub fn ric_surrogate<T: Scalar>(a: &DenseMatrix<T>, s: usize, mode: RicMode) -> Result<RicEstimate> {
    let n = a.cols();
    if s == 0 || s > n {
        return Err(Error::InvalidArgument(format!(
            "sparsity {s} outside [1, {n}]"
        )));
    }
    match mode {
        RicMode::Exact => {
            let count = binomial(n, s);
            if count > MAX_EXACT_SUPPORTS {
                return Err(Error::TooManySupports {
                    count,
                    limit: MAX_EXACT_SUPPORTS,
                });
            }
            let mut idx: Vec<usize> = (0..s).collect();
            let mut delta = 0.0f64;
            let mut scanned = 0;
            loop {
                delta = delta.max(support_distortion(a, &idx)?);
                scanned += 1;
                if !next_combination(&mut idx, n) {
                    break;
                }
            }
            Ok(RicEstimate {
                delta,
                sparsity: s,
                lower_bound: false,
                supports_scanned: scanned,
            })
        }
        RicMode::MonteCarlo { n_samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut delta = 0.0f64;
            for _ in 0..n_samples {
                let support = SupportSet::new(sample(&mut rng, n, s).into_vec(), n)?;
                delta = delta.max(support_distortion(a, support.indices())?);
            }
            Ok(RicEstimate {
                delta,
                sparsity: s,
                lower_bound: true,
                supports_scanned: n_samples,
            })
        }
    }
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
