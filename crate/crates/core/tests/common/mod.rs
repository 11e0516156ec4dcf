#![allow(dead_code)]

use greedy_unfold::linalg::DenseMatrix;
use greedy_unfold::scalar::{Complex64, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub trait Draw: Scalar {
    fn draw(rng: &mut ChaCha8Rng) -> Self;
}

impl Draw for f64 {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        normal(rng)
    }
}

impl Draw for Complex64 {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let re = normal(rng);
        Complex64::new(re, normal(rng))
    }
}

/// Gaussian matrix scaled by `1/sqrt(m)`, optionally with unit columns.
pub fn gaussian<T: Draw>(m: usize, n: usize, normalize: bool, rng: &mut ChaCha8Rng) -> DenseMatrix<T> {
    let scale = 1.0 / (m as f64).sqrt();
    let mut a = DenseMatrix::from_fn(m, n, |_, _| T::draw(rng).scale(scale));
    if normalize {
        a.normalize_columns();
    }
    a
}

/// `s`-sparse vector with Gaussian values on a uniformly drawn support.
pub fn sparse<T: Draw>(n: usize, s: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let support = rand::seq::index::sample(rng, n, s).into_vec();
    let mut x = vec![T::zero(); n];
    for j in support {
        x[j] = T::draw(rng);
    }
    x
}

pub fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x - *y).modulus()).fold(0.0, f64::max)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Least squares through the normal equations solved by Gaussian elimination
/// with partial pivoting; independent of the library's QR.
pub fn normal_equations<T: Scalar>(a: &DenseMatrix<T>, cols: &[usize], y: &[T]) -> Vec<T> {
    let k = cols.len();
    let mut g = vec![vec![T::zero(); k + 1]; k];
    for i in 0..k {
        let ci = a.column(cols[i]);
        for j in 0..k {
            let cj = a.column(cols[j]);
            g[i][j] = ci.iter().zip(cj).map(|(p, q)| p.conj() * *q).sum();
        }
        g[i][k] = ci.iter().zip(y).map(|(p, q)| p.conj() * *q).sum();
    }
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&p, &q| g[p][col].modulus().partial_cmp(&g[q][col].modulus()).unwrap())
            .unwrap();
        g.swap(col, piv);
        for row in col + 1..k {
            let f = g[row][col] / g[col][col];
            for c in col..=k {
                let t = g[col][c];
                g[row][c] -= f * t;
            }
        }
    }
    let mut z = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut acc = g[i][k];
        for j in i + 1..k {
            acc -= g[i][j] * z[j];
        }
        z[i] = acc / g[i][i];
    }
    z
}

/// Best `s`-sparse fit of `y` by exhaustive support search.
pub fn l0_oracle<T: Scalar>(a: &DenseMatrix<T>, y: &[T], s: usize) -> Vec<T> {
    let mut best = (f64::INFINITY, vec![T::zero(); a.cols()]);
    for cols in subsets(a.cols(), s) {
        let z = normal_equations(a, &cols, y);
        let mut x = vec![T::zero(); a.cols()];
        for (&j, &zj) in cols.iter().zip(&z) {
            x[j] = zj;
        }
        let ax = a.matvec(&x).unwrap();
        let res: f64 = ax.iter().zip(y).map(|(p, q)| (*p - *q).modulus_sq()).sum();
        if res < best.0 {
            best = (res, x);
        }
    }
    best.1
}

pub mod dd;

pub mod theorem {
    use super::*;
    use greedy_unfold::bounds::{
        frobenius_bounds_check, iht_gap, iht_single_step_check, verify_theorem, BoundReport,
        Family, FrobeniusReport, SingleStepReport, VerifyOptions,
    };
    use greedy_unfold::linalg::shifted_gram_norm;
    use greedy_unfold::scalar::{distance, l2_norm};
    use greedy_unfold::solvers::{iht_step, p_omp, soft_omp, SolverConfig};

    pub const ROWS: usize = 30;
    pub const COLS: usize = 60;
    pub const SPARSITY: usize = 4;
    pub const IHT_ITERS: usize = 6;

    pub fn instance(seed: u64) -> (DenseMatrix<f64>, Vec<f64>) {
        let mut r = rng(0x7e0 + seed);
        let a: DenseMatrix<f64> = gaussian(ROWS, COLS, true, &mut r);
        let x: Vec<f64> = sparse(COLS, SPARSITY, &mut r);
        let y = a.matvec(&x).unwrap();
        (a, y)
    }

    pub fn config(family: Family) -> SolverConfig {
        match family {
            Family::Omp => SolverConfig::omp(SPARSITY),
            Family::Iht => SolverConfig::iht(SPARSITY, 1.0, IHT_ITERS),
        }
    }

    pub fn reports(family: Family, n: u64, opts: &VerifyOptions) -> Vec<BoundReport> {
        (0..n)
            .map(|seed| {
                let (a, y) = instance(seed);
                verify_theorem(family, &a, &y, &config(family), opts).unwrap()
            })
            .collect()
    }

    /// pOMP against Soft-OMP at a temperature a fixed fraction of the gap.
    pub fn frobenius(n: u64) -> Vec<FrobeniusReport> {
        (0..n)
            .map(|seed| {
                let (a, y) = instance(seed);
                let cfg = config(Family::Omp);
                let exact = p_omp(&a, &y, &cfg).unwrap();
                let g = greedy_unfold::bounds::omp_gaps(&exact).global_gap;
                let tau = g / 5.0;
                let soft = soft_omp(&a, &y, &cfg.clone().with_tau(tau)).unwrap();
                frobenius_bounds_check(&exact, &soft, tau).unwrap()
            })
            .collect()
    }

    /// Single IHT steps from a sparse point and a nearby perturbation of it.
    pub fn single_steps(n: u64) -> Vec<SingleStepReport> {
        (0..n)
            .map(|seed| {
                let (a, y) = instance(seed);
                let cfg = config(Family::Iht);
                let mut r = rng(0x51e9 + seed);
                let x: Vec<f64> = sparse(COLS, SPARSITY, &mut r);
                let g = iht_gap(&iht_step(&a, &y, &x, &cfg).unwrap().v);
                let l = shifted_gram_norm(&a, 1.0).unwrap();
                let dir: Vec<f64> = (0..COLS).map(|_| normal(&mut r)).collect();
                let radius = 0.25 * g / (2.0 * l) / l2_norm(&dir);
                let x_tilde: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + radius * d).collect();
                debug_assert!(distance(&x, &x_tilde) < g / (2.0 * l));
                iht_single_step_check(&a, &y, &x, &x_tilde, &cfg, g / 5.0).unwrap()
            })
            .collect()
    }
}
