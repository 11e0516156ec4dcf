//! OMP, IHT, their permutation forms pOMP/pIHT, and the softsort-based
//! Soft-OMP/Soft-IHT, each returning a full per-iteration trace.

pub(crate) mod kernels;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{embed, DenseMatrix, QrFactor, SupportSet};
use crate::scalar::{l2_norm, moduli, Scalar};
use crate::sortops::{argmax, argsort_desc, softmax_row, sum_rows};

use kernels::{combine, gradient_step, hadamard, residual, weighted};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Omp,
    Iht,
    POmp,
    PIht,
    SoftOmp,
    SoftIht,
}

impl SolverKind {
    pub fn is_soft(self) -> bool {
        matches!(self, SolverKind::SoftOmp | SolverKind::SoftIht)
    }

    pub fn is_omp_family(self) -> bool {
        matches!(self, SolverKind::Omp | SolverKind::POmp | SolverKind::SoftOmp)
    }

    /// The exact counterpart of a soft solver (identity otherwise).
    pub fn exact(self) -> SolverKind {
        match self {
            SolverKind::SoftOmp => SolverKind::Omp,
            SolverKind::SoftIht => SolverKind::Iht,
            other => other,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Target sparsity; the OMP family runs exactly `k` iterations.
    pub k: usize,
    /// IHT step size.
    pub eta: f64,
    /// IHT iteration budget.
    pub n_iter: usize,
    pub tau: Option<f64>,
    pub weights: Option<Vec<f64>>,
}

impl SolverConfig {
    pub fn omp(k: usize) -> Self {
        Self {
            k,
            eta: 1.0,
            n_iter: k,
            tau: None,
            weights: None,
        }
    }

    pub fn iht(k: usize, eta: f64, n_iter: usize) -> Self {
        Self {
            k,
            eta,
            n_iter,
            tau: None,
            weights: None,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = Some(tau);
        self
    }

    pub fn with_weights(mut self, w: Vec<f64>) -> Self {
        self.weights = Some(w);
        self
    }

    pub fn validate(&self, kind: SolverKind, m: usize, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.k == 0 || self.k > n {
            return bad(format!("k = {} outside [1, {n}]", self.k));
        }
        if kind.is_omp_family() && self.k > m {
            return bad(format!("k = {} exceeds the {m} measurements", self.k));
        }
        if !kind.is_omp_family() && !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("step size must be positive, got {}", self.eta));
        }
        match (kind.is_soft(), self.tau) {
            (true, None) => return bad(format!("{kind:?} needs a temperature")),
            (false, Some(_)) => return bad(format!("{kind:?} takes no temperature")),
            (true, Some(t)) if !(t > 0.0 && t.is_finite()) => {
                return bad(format!("temperature must be positive, got {t}"))
            }
            _ => {}
        }
        if let Some(w) = &self.weights {
            if w.len() != n {
                return bad(format!("{} weights for {n} columns", w.len()));
            }
            if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return bad("weights must be finite and nonnegative".into());
            }
        }
        Ok(())
    }
}

/// What an iteration selected: a support (OMP, pOMP), the argmax of the soft
/// row (Soft-OMP), or a thresholding mask (IHT family).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Support(SupportSet),
    Indices(Vec<usize>),
    Mask(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace<T> {
    pub kind: SolverKind,
    /// `iterates[n]` is `x^(n)`, starting with `x^(0)`.
    pub iterates: Vec<Vec<T>>,
    /// `sort_targets[n]` is `v^(n+1)`, the vector sorted in iteration `n + 1`.
    pub sort_targets: Vec<Vec<f64>>,
    pub selections: Vec<Selection>,
    /// `residual_norms[n] = ||y - A x^(n)||`.
    pub residual_norms: Vec<f64>,
    /// Permutation or softsort rows used in each iteration (empty for OMP/IHT).
    pub selected_rows: Vec<Vec<Vec<f64>>>,
    /// Iterations whose exact selection had to break a tie.
    pub ties: usize,
}

impl<T: Scalar> SolverTrace<T> {
    fn new(kind: SolverKind, x0: Vec<T>) -> Self {
        Self {
            kind,
            iterates: vec![x0],
            sort_targets: Vec::new(),
            selections: Vec::new(),
            residual_norms: Vec::new(),
            selected_rows: Vec::new(),
            ties: 0,
        }
    }

    pub fn output(&self) -> &[T] {
        self.iterates.last().expect("trace holds x^(0)")
    }

    pub fn n_iterations(&self) -> usize {
        self.iterates.len() - 1
    }

    fn finish(mut self, a: &DenseMatrix<T>, y: &[T]) -> Self {
        self.residual_norms = self
            .iterates
            .iter()
            .map(|x| l2_norm(&residual(a, y, x)))
            .collect();
        self
    }
}

fn check_shapes<T: Scalar>(a: &DenseMatrix<T>, y: &[T], x0: Option<&[T]>) -> Result<()> {
    if y.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            op: "solve",
            left: a.shape(),
            right: (y.len(), 1),
        });
    }
    if let Some(x0) = x0 {
        if x0.len() != a.cols() {
            return Err(Error::DimensionMismatch {
                op: "initial iterate",
                left: a.shape(),
                right: (x0.len(), 1),
            });
        }
    }
    Ok(())
}

fn has_tie(v: &[f64], best: usize) -> bool {
    v.iter().enumerate().any(|(j, &x)| j != best && x == v[best])
}

/// Runs any of the six solvers. IHT-family solvers start from zero.
pub fn solve<T: Scalar>(
    kind: SolverKind,
    a: &DenseMatrix<T>,
    y: &[T],
    cfg: &SolverConfig,
) -> Result<SolverTrace<T>> {
    solve_from(kind, a, y, cfg, None)
}

/// As [`solve`], with an optional IHT starting point (ignored by OMP).
pub fn solve_from<T: Scalar>(
    kind: SolverKind,
    a: &DenseMatrix<T>,
    y: &[T],
    cfg: &SolverConfig,
    x0: Option<&[T]>,
) -> Result<SolverTrace<T>> {
    cfg.validate(kind, a.rows(), a.cols())?;
    check_shapes(a, y, x0)?;
    match kind {
        SolverKind::Omp => run_omp(a, y, cfg),
        SolverKind::POmp => run_projection_omp(kind, a, y, cfg, |v| {
            let mut row = vec![0.0; v.len()];
            row[argmax(v)] = 1.0;
            row
        }),
        SolverKind::SoftOmp => {
            let tau = cfg.tau.expect("validated");
            run_projection_omp(kind, a, y, cfg, |v| {
                let pivot = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                softmax_row(v, pivot, tau)
            })
        }
        SolverKind::Iht | SolverKind::PIht | SolverKind::SoftIht => {
            let x0 = x0.map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); a.cols()]);
            run_iht(kind, a, y, cfg, x0)
        }
    }
}

pub fn omp<T: Scalar>(a: &DenseMatrix<T>, y: &[T], cfg: &SolverConfig) -> Result<SolverTrace<T>> {
    solve(SolverKind::Omp, a, y, cfg)
}

pub fn p_omp<T: Scalar>(a: &DenseMatrix<T>, y: &[T], cfg: &SolverConfig) -> Result<SolverTrace<T>> {
    solve(SolverKind::POmp, a, y, cfg)
}

pub fn soft_omp<T: Scalar>(a: &DenseMatrix<T>, y: &[T], cfg: &SolverConfig) -> Result<SolverTrace<T>> {
    solve(SolverKind::SoftOmp, a, y, cfg)
}

pub fn iht<T: Scalar>(a: &DenseMatrix<T>, y: &[T], cfg: &SolverConfig) -> Result<SolverTrace<T>> {
    solve(SolverKind::Iht, a, y, cfg)
}

pub fn p_iht<T: Scalar>(a: &DenseMatrix<T>, y: &[T], cfg: &SolverConfig) -> Result<SolverTrace<T>> {
    solve(SolverKind::PIht, a, y, cfg)
}

pub fn soft_iht<T: Scalar>(a: &DenseMatrix<T>, y: &[T], cfg: &SolverConfig) -> Result<SolverTrace<T>> {
    solve(SolverKind::SoftIht, a, y, cfg)
}

fn run_omp<T: Scalar>(a: &DenseMatrix<T>, y: &[T], cfg: &SolverConfig) -> Result<SolverTrace<T>> {
    let n = a.cols();
    let mut trace = SolverTrace::new(SolverKind::Omp, vec![T::zero(); n]);
    let mut order: Vec<usize> = Vec::with_capacity(cfg.k);
    let mut x = vec![T::zero(); n];
    for _ in 0..cfg.k {
        let r = residual(a, y, &x);
        let c = a.adjoint_matvec_unchecked(&r);
        let v = weighted(&moduli(&c), cfg.weights.as_deref());
        let j = argmax(&v);
        if has_tie(&v, j) {
            trace.ties += 1;
        }
        if order.contains(&j) {
            return Err(Error::RankDeficient {
                index: order.len(),
                pivot: 0.0,
                tol: 0.0,
            });
        }
        order.push(j);
        let b = a.select_columns(&order)?;
        let z = QrFactor::new(&b)?.solve(y)?;
        x = vec![T::zero(); n];
        for (&j, &zj) in order.iter().zip(&z) {
            x[j] = zj;
        }
        trace.sort_targets.push(v);
        trace
            .selections
            .push(Selection::Support(SupportSet::new(order.clone(), n)?));
        trace.iterates.push(x.clone());
    }
    Ok(trace.finish(a, y))
}

fn run_projection_omp<T: Scalar>(
    kind: SolverKind,
    a: &DenseMatrix<T>,
    y: &[T],
    cfg: &SolverConfig,
    row_of: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<SolverTrace<T>> {
    let n = a.cols();
    let mut trace = SolverTrace::new(kind, vec![T::zero(); n]);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(cfg.k);
    let mut b_cols: Vec<Vec<T>> = Vec::with_capacity(cfg.k);
    let mut picked: Vec<usize> = Vec::with_capacity(cfg.k);
    let mut x = vec![T::zero(); n];
    for _ in 0..cfg.k {
        let r = residual(a, y, &x);
        let c = a.adjoint_matvec_unchecked(&r);
        let v = weighted(&moduli(&c), cfg.weights.as_deref());
        let j = argmax(&v);
        if has_tie(&v, j) {
            trace.ties += 1;
        }
        let p = row_of(&v);
        b_cols.push(a.matvec_real_unchecked(&p));
        rows.push(p);
        picked.push(j);
        let b = DenseMatrix::from_columns(&b_cols)?;
        let z = QrFactor::new(&b)?.solve(y)?;
        x = combine(&z, &rows, n);
        trace.sort_targets.push(v);
        trace.selections.push(if kind == SolverKind::POmp {
            Selection::Support(SupportSet::new(picked.clone(), n)?)
        } else {
            Selection::Indices(picked.clone())
        });
        trace.selected_rows.push(vec![rows.last().expect("pushed").clone()]);
        trace.iterates.push(x.clone());
    }
    Ok(trace.finish(a, y))
}

/// Output of one IHT-family iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IhtStep<T> {
    /// `u = x + eta A*(y - A x)`.
    pub u: Vec<T>,
    /// The sort target `v = w ⊙ |u|`.
    pub v: Vec<f64>,
    /// Rows `1..k` of the (soft) permutation of `v`.
    pub rows: Vec<Vec<f64>>,
    pub mask: Vec<f64>,
    pub x: Vec<T>,
}

/// One exact pIHT step; the new iterate equals `H_k(u)`.
pub fn iht_step<T: Scalar>(
    a: &DenseMatrix<T>,
    y: &[T],
    x: &[T],
    cfg: &SolverConfig,
) -> Result<IhtStep<T>> {
    check_shapes(a, y, Some(x))?;
    step(a, y, x, cfg, None)
}

/// One Soft-IHT step at temperature `tau`.
pub fn soft_iht_step<T: Scalar>(
    a: &DenseMatrix<T>,
    y: &[T],
    x: &[T],
    cfg: &SolverConfig,
    tau: f64,
) -> Result<IhtStep<T>> {
    check_shapes(a, y, Some(x))?;
    step(a, y, x, cfg, Some(tau))
}

fn step<T: Scalar>(
    a: &DenseMatrix<T>,
    y: &[T],
    x: &[T],
    cfg: &SolverConfig,
    tau: Option<f64>,
) -> Result<IhtStep<T>> {
    step_with_order(a, y, x, cfg, tau).map(|(s, _)| s)
}

/// One step plus the argsort of its sort target.
fn step_with_order<T: Scalar>(
    a: &DenseMatrix<T>,
    y: &[T],
    x: &[T],
    cfg: &SolverConfig,
    tau: Option<f64>,
) -> Result<(IhtStep<T>, Vec<usize>)> {
    let r = residual(a, y, x);
    let c = a.adjoint_matvec_unchecked(&r);
    let u = gradient_step(x, &c, cfg.eta);
    let v = weighted(&moduli(&u), cfg.weights.as_deref());
    if !v.iter().all(|e| e.is_finite()) {
        return Err(Error::InvalidArgument("sort target has non-finite entries".into()));
    }
    let order = argsort_desc(&v).order;
    let rows = order[..cfg.k]
        .iter()
        .map(|&j| match tau {
            Some(t) => softmax_row(&v, v[j], t),
            None => {
                let mut row = vec![0.0; v.len()];
                row[j] = 1.0;
                row
            }
        })
        .collect::<Vec<_>>();
    let mask = sum_rows(&rows);
    let x = hadamard(&mask, &u);
    Ok((IhtStep { u, v, rows, mask, x }, order))
}

fn run_iht<T: Scalar>(
    kind: SolverKind,
    a: &DenseMatrix<T>,
    y: &[T],
    cfg: &SolverConfig,
    x0: Vec<T>,
) -> Result<SolverTrace<T>> {
    let mut trace = SolverTrace::new(kind, x0.clone());
    let mut x = x0;
    for _ in 0..cfg.n_iter {
        let (s, order) = if kind == SolverKind::Iht {
            let r = residual(a, y, &x);
            let c = a.adjoint_matvec_unchecked(&r);
            let u = gradient_step(&x, &c, cfg.eta);
            let v = weighted(&moduli(&u), cfg.weights.as_deref());
            let order = argsort_desc(&v).order;
            let mut x = vec![T::zero(); u.len()];
            for &j in &order[..cfg.k] {
                x[j] = u[j];
            }
            let mask = x.iter().map(|&xj| if xj != T::zero() { 1.0 } else { 0.0 }).collect();
            (IhtStep { u, v, rows: Vec::new(), mask, x }, order)
        } else {
            step_with_order(a, y, &x, cfg, cfg.tau)?
        };
        if cfg.k < s.v.len() {
            if s.v[order[cfg.k]] == s.v[order[cfg.k - 1]] {
                trace.ties += 1;
            }
        }
        x = s.x;
        trace.sort_targets.push(s.v);
        trace.selections.push(Selection::Mask(s.mask));
        if kind != SolverKind::Iht {
            trace.selected_rows.push(s.rows);
        }
        trace.iterates.push(x.clone());
    }
    Ok(trace.finish(a, y))
}

fn threshold_by<T: Scalar>(u: &[T], v: &[f64], k: usize) -> Vec<T> {
    let mut out = vec![T::zero(); u.len()];
    for &j in &argsort_desc(v).order[..k] {
        out[j] = u[j];
    }
    out
}

/// `H_k(u)`: keeps the `k` entries of largest `|u_j|` (largest `w_j |u_j|`
/// when weighted) and zeroes the rest.
pub fn hard_threshold<T: Scalar>(u: &[T], k: usize, weights: Option<&[f64]>) -> Result<Vec<T>> {
    if k == 0 || k > u.len() {
        return Err(Error::InvalidArgument(format!("k = {k} outside [1, {}]", u.len())));
    }
    if let Some(w) = weights {
        if w.len() != u.len() {
            return Err(Error::DimensionMismatch {
                op: "hard_threshold",
                left: (u.len(), 1),
                right: (w.len(), 1),
            });
        }
    }
    Ok(threshold_by(u, &weighted(&moduli(u), weights), k))
}

/// Embeds a least-squares solution on `support` (helper for oracles and reports).
pub fn support_solution<T: Scalar>(
    a: &DenseMatrix<T>,
    y: &[T],
    support: &SupportSet,
) -> Result<Vec<T>> {
    let z = QrFactor::new(&a.restrict_columns(support)?)?.solve(y)?;
    embed(&z, support, a.cols())
}
