//! Computable min-gaps, constants and temperature bounds under which Soft-OMP
//! and Soft-IHT provably track OMP and IHT, plus empirical checks of them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    coherence, operator_norm, ric_surrogate, shifted_gram_norm, singular_values, DenseMatrix,
    RicMode,
};
use crate::scalar::{distance, l2_norm, linf_norm, Scalar};
use crate::solvers::{iht_step, soft_iht_step, solve, Selection, SolverConfig, SolverKind, SolverTrace};
use crate::sortops::{argmax, argsort_desc};

/// Gaps at or below this are ties.
pub const TIE_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Omp,
    Iht,
}

impl Family {
    fn kinds(self) -> (SolverKind, SolverKind) {
        match self {
            Family::Omp => (SolverKind::POmp, SolverKind::SoftOmp),
            Family::Iht => (SolverKind::PIht, SolverKind::SoftIht),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub family: Family,
    pub local_gaps: Vec<f64>,
    pub global_gap: f64,
    pub has_tie: bool,
}

impl GapReport {
    fn from_local(family: Family, local_gaps: Vec<f64>) -> Self {
        let global_gap = local_gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        let has_tie = local_gaps.iter().any(|&g| g <= TIE_TOL);
        Self {
            family,
            local_gaps,
            global_gap,
            has_tie,
        }
    }

    /// `g^(1:k)`, the smallest of the first `k` local gaps.
    pub fn prefix_gap(&self, k: usize) -> f64 {
        self.local_gaps[..k].iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Distance from the maximum of `v` to its nearest other entry.
pub fn omp_gap(v: &[f64]) -> f64 {
    let j = argmax(v);
    v.iter()
        .enumerate()
        .filter(|&(i, _)| i != j)
        .map(|(_, &x)| (x - v[j]).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Smallest distance between any two entries of `v`.
pub fn iht_gap(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    s.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

pub fn omp_gaps<T>(trace: &SolverTrace<T>) -> GapReport {
    GapReport::from_local(Family::Omp, trace.sort_targets.iter().map(|v| omp_gap(v)).collect())
}

pub fn iht_gaps<T>(trace: &SolverTrace<T>) -> GapReport {
    GapReport::from_local(Family::Iht, trace.sort_targets.iter().map(|v| iht_gap(v)).collect())
}

/// How the factor `1/sqrt(1 - delta_n)` in the OMP constant is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SigmaMinMode {
    /// Restricted isometry constant `delta_n` of the whole matrix.
    Ric { ric: RicMode },
    /// Largest `1/sigma_min(A_S)` over the supports actually visited.
    Empirical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub value: f64,
    /// Natural log of `value`; finite even when `value` overflows.
    pub log_value: f64,
    /// `1/sqrt(1 - delta_n)` or its empirical replacement (OMP).
    pub beta: Option<f64>,
    pub mode: String,
}

impl ConstantReport {
    fn from_log(log_value: f64, beta: Option<f64>, mode: String) -> Self {
        Self {
            value: log_value.exp(),
            log_value,
            beta,
            mode,
        }
    }
}

fn max_column_norm<T: Scalar>(a: &DenseMatrix<T>) -> f64 {
    a.column_norms().into_iter().fold(0.0, f64::max)
}

/// `sqrt(2n)(N - 1)(beta + (sqrt(n) + 1)||A|| beta^2)||y||`.
pub fn omp_constant_with_beta<T: Scalar>(a: &DenseMatrix<T>, y: &[T], n: usize, beta: f64) -> Result<f64> {
    let norm_a = operator_norm(a)?;
    let nf = n as f64;
    Ok((2.0 * nf).sqrt()
        * (a.cols() as f64 - 1.0)
        * (beta + (nf.sqrt() + 1.0) * norm_a * beta * beta)
        * l2_norm(y))
}

/// OMP constant after `n` iterations. Empirical mode reads the supports from
/// an exact OMP-family trace.
pub fn omp_constant<T: Scalar>(
    a: &DenseMatrix<T>,
    y: &[T],
    n: usize,
    mode: SigmaMinMode,
    trace: Option<&SolverTrace<T>>,
) -> Result<ConstantReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("the OMP constant needs n >= 1".into()));
    }
    let (beta, label) = match mode {
        SigmaMinMode::Ric { ric } => {
            let est = ric_surrogate(a, n, ric)?;
            if est.delta >= 1.0 {
                return Err(Error::HypothesisViolated(format!(
                    "restricted isometry constant {} >= 1",
                    est.delta
                )));
            }
            let label = if est.lower_bound { "ric-monte-carlo" } else { "ric-exact" };
            (1.0 / (1.0 - est.delta).sqrt(), label)
        }
        SigmaMinMode::Empirical => {
            let trace = trace.ok_or_else(|| {
                Error::InvalidArgument("empirical mode needs an exact OMP trace".into())
            })?;
            let mut beta = 0.0f64;
            for sel in trace.selections.iter().take(n) {
                let Selection::Support(s) = sel else {
                    return Err(Error::InvalidArgument("trace does not record supports".into()));
                };
                let smin = *singular_values(&a.restrict_columns(s)?)?
                    .last()
                    .expect("nonempty support");
                if smin <= 0.0 {
                    return Err(Error::HypothesisViolated(format!(
                        "support {:?} is rank deficient",
                        s.one_based()
                    )));
                }
                beta = beta.max(1.0 / smin);
            }
            if trace.selections.len() < n {
                return Err(Error::InvalidArgument(format!(
                    "trace has {} iterations, need {n}",
                    trace.selections.len()
                )));
            }
            (beta, "empirical")
        }
    };
    let c = omp_constant_with_beta(a, y, n, beta)?;
    Ok(ConstantReport::from_log(c.ln(), Some(beta), label.into()))
}

/// `ln((r^n - 1)/(r - 1))`, with the limit `ln n` at `r = 1`.
fn log_geometric_sum(r: f64, n: usize) -> f64 {
    let nf = n as f64;
    if (r - 1.0).abs() <= 1e-12 {
        nf.ln()
    } else if r < 1.0 {
        ((1.0 - r.powf(nf)) / (1.0 - r)).ln()
    } else {
        let log_rn = nf * r.ln();
        log_rn + (-(-log_rn).exp()).ln_1p() - (r - 1.0).ln()
    }
}

/// IHT constant after `n` iterations of a trace with step size `eta` and
/// thresholding level `s`:
/// `2sN G_n(sL) ((max_i |1 - eta ||a_i||^2| + eta s mu) X + eta max_i ||a_i|| ||y||)`
/// with `L = ||I - eta A*A||`, `X = max_{k<n} ||x^(k)||` and `G_n` the
/// geometric sum. At `eta = 1` with unit columns this is
/// `2sN G_n(sL)(||y|| + s mu X)`.
pub fn iht_constant<T: Scalar>(
    a: &DenseMatrix<T>,
    y: &[T],
    trace: &SolverTrace<T>,
    n: usize,
    s: usize,
    eta: f64,
) -> Result<ConstantReport> {
    if n == 0 || n > trace.n_iterations() {
        return Err(Error::InvalidArgument(format!(
            "n = {n} outside [1, {}]",
            trace.n_iterations()
        )));
    }
    let l = shifted_gram_norm(a, eta)?;
    let x_max = trace.iterates[..n].iter().map(|x| l2_norm(x)).fold(0.0, f64::max);
    let log_c = iht_log_constant(a, y, n, s, eta, l, x_max)?;
    Ok(ConstantReport::from_log(log_c, None, "coherence".into()))
}

fn iht_log_constant<T: Scalar>(
    a: &DenseMatrix<T>,
    y: &[T],
    n: usize,
    s: usize,
    eta: f64,
    l: f64,
    x_max: f64,
) -> Result<f64> {
    let sf = s as f64;
    let d = iht_step_scale(a, y, s, eta)?;
    let amp = d.0 * x_max + d.1;
    Ok((2.0 * sf * a.cols() as f64).ln() + log_geometric_sum(sf * l, n) + amp.ln())
}

/// `(max_i |1 - eta ||a_i||^2| + eta s mu, eta max_i ||a_i|| ||y||)`: the
/// coefficients bounding `||u||_inf <= c_x ||x||_inf + c_y` for s-sparse x.
fn iht_step_scale<T: Scalar>(a: &DenseMatrix<T>, y: &[T], s: usize, eta: f64) -> Result<(f64, f64)> {
    let mu = coherence(a)?;
    let diag = a
        .column_norms()
        .iter()
        .map(|c| (1.0 - eta * c * c).abs())
        .fold(0.0, f64::max);
    Ok((diag + eta * s as f64 * mu, eta * max_column_norm(a) * l2_norm(y)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauBound {
    pub tau: f64,
    /// The inequalities that were checked.
    pub checked: String,
}

/// `tau <= (gap - 2 amp eps) / ln(C / eps)`.
pub fn tau_bound(gap: f64, epsilon: f64, amplifier: f64, c: f64) -> Result<TauBound> {
    tau_bound_log(gap, epsilon, amplifier, c.ln())
}

/// As [`tau_bound`] with `ln C` given directly.
pub fn tau_bound_log(gap: f64, epsilon: f64, amplifier: f64, log_c: f64) -> Result<TauBound> {
    if !(gap > TIE_TOL) {
        return Err(Error::NoValidTau(format!("gap {gap} is a tie")));
    }
    let limit = gap / (2.0 * amplifier);
    if !(epsilon > 0.0 && epsilon < limit) {
        return Err(Error::NoValidTau(format!(
            "need 0 < eps < g/(2*amplifier) = {limit}, got eps = {epsilon}"
        )));
    }
    let log_ratio = log_c - epsilon.ln();
    if !(log_ratio > 0.0) {
        return Err(Error::NoValidTau(format!(
            "need C > eps, got ln C = {log_c}, eps = {epsilon}"
        )));
    }
    Ok(TauBound {
        tau: (gap - 2.0 * amplifier * epsilon) / log_ratio,
        checked: format!("0 < eps < g/(2*amplifier) = {limit}; C > eps"),
    })
}

/// Rule for choosing the target accuracy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EpsilonRule {
    Fixed { value: f64 },
    /// `eps = g / (divisor * amplifier)` from the exact run's global gap.
    GapScaled { divisor: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    pub epsilon: EpsilonRule,
    pub sigma_mode: SigmaMinMode,
    /// Multiplier on the derived temperature (1 for the theorem check,
    /// larger for negative controls).
    pub tau_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            epsilon: EpsilonRule::GapScaled { divisor: 4.0 },
            sigma_mode: SigmaMinMode::Empirical,
            tau_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub family: Family,
    pub n_iter: usize,
    pub epsilon: f64,
    /// `||A|| max_j ||a_j||` (OMP) or `||I - eta A*A||` (IHT).
    pub amplifier: f64,
    pub gaps: GapReport,
    /// Constant of the final iteration.
    pub constant_c: f64,
    pub log_constant_c: f64,
    pub constant_mode: String,
    pub tau_bound: Option<f64>,
    pub tau_used: Option<f64>,
    pub precondition_ok: bool,
    pub precondition_detail: String,
    pub observed_max_error: Option<f64>,
    pub index_tracking: Option<bool>,
    /// First iteration (1-based) where the soft selection diverged.
    pub first_mismatch: Option<usize>,
    pub satisfied: bool,
}

/// Runs the exact solver, derives a temperature from the bound, runs the soft
/// solver at that temperature and reports whether it stayed within `eps`.
pub fn verify_theorem<T: Scalar>(
    family: Family,
    a: &DenseMatrix<T>,
    y: &[T],
    cfg: &SolverConfig,
    opts: &VerifyOptions,
) -> Result<BoundReport> {
    if cfg.weights.is_some() {
        return Err(Error::InvalidArgument("the bounds are stated without weights".into()));
    }
    let (exact_kind, soft_kind) = family.kinds();
    let exact_cfg = SolverConfig { tau: None, ..cfg.clone() };
    let exact = solve(exact_kind, a, y, &exact_cfg)?;
    let n = exact.n_iterations();
    let gaps = match family {
        Family::Omp => omp_gaps(&exact),
        Family::Iht => iht_gaps(&exact),
    };
    let amplifier = match family {
        Family::Omp => operator_norm(a)? * max_column_norm(a),
        Family::Iht => shifted_gram_norm(a, cfg.eta)?,
    };
    let epsilon = match opts.epsilon {
        EpsilonRule::Fixed { value } => value,
        EpsilonRule::GapScaled { divisor } => gaps.global_gap / (divisor * amplifier),
    };

    let mut log_cs = Vec::with_capacity(n);
    let mut mode = String::new();
    match family {
        Family::Omp => {
            for k in 1..=n {
                let c = omp_constant(a, y, k, opts.sigma_mode, Some(&exact))?;
                mode = c.mode;
                log_cs.push(c.log_value);
            }
        }
        Family::Iht => {
            let l = amplifier;
            let mut x_max = 0.0f64;
            for k in 1..=n {
                x_max = x_max.max(l2_norm(&exact.iterates[k - 1]));
                log_cs.push(iht_log_constant(a, y, k, cfg.k, cfg.eta, l, x_max)?);
            }
            mode = "coherence".into();
        }
    }
    let log_c = *log_cs.last().unwrap_or(&f64::NAN);

    let mut tau = f64::INFINITY;
    let mut detail = String::new();
    let mut precondition_ok = n > 0;
    for k in 1..=n {
        match tau_bound_log(gaps.prefix_gap(k), epsilon, amplifier, log_cs[k - 1]) {
            Ok(b) => {
                tau = tau.min(b.tau);
                detail = b.checked;
            }
            Err(e) => {
                precondition_ok = false;
                detail = format!("iteration {k}: {e}");
                break;
            }
        }
    }

    let mut report = BoundReport {
        family,
        n_iter: n,
        epsilon,
        amplifier,
        gaps,
        constant_c: log_c.exp(),
        log_constant_c: log_c,
        constant_mode: mode,
        tau_bound: None,
        tau_used: None,
        precondition_ok,
        precondition_detail: detail,
        observed_max_error: None,
        index_tracking: None,
        first_mismatch: None,
        satisfied: false,
    };
    if !precondition_ok {
        return Ok(report);
    }
    let tau_used = tau * opts.tau_scale;
    let soft = solve(soft_kind, a, y, &exact_cfg.clone().with_tau(tau_used))?;
    let observed = exact
        .iterates
        .iter()
        .zip(&soft.iterates)
        .map(|(x, xt)| distance(x, xt))
        .fold(0.0, f64::max);
    let first_mismatch = first_tracking_mismatch(family, &exact, &soft);
    report.tau_bound = Some(tau);
    report.tau_used = Some(tau_used);
    report.observed_max_error = Some(observed);
    report.index_tracking = Some(first_mismatch.is_none());
    report.first_mismatch = first_mismatch;
    report.satisfied = observed <= epsilon;
    Ok(report)
}

/// 1-based iteration where the soft run stops selecting like the exact run.
fn first_tracking_mismatch<T>(family: Family, exact: &SolverTrace<T>, soft: &SolverTrace<T>) -> Option<usize> {
    match family {
        Family::Omp => exact
            .selected_rows
            .iter()
            .zip(&soft.selected_rows)
            .position(|(p, pt)| argmax(&p[0]) != argmax(&pt[0]))
            .map(|i| i + 1),
        Family::Iht => exact
            .sort_targets
            .iter()
            .zip(&soft.sort_targets)
            .position(|(v, vt)| argsort_desc(v) != argsort_desc(vt))
            .map(|i| i + 1),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrobeniusReport {
    pub n: usize,
    pub soft_norm: f64,
    pub soft_norm_bound: f64,
    pub difference: f64,
    pub difference_bound: f64,
    pub soft_gap: f64,
    pub skipped: Option<String>,
}

impl FrobeniusReport {
    /// Smaller of the two slacks (bound minus value).
    pub fn slack(&self) -> f64 {
        (self.soft_norm_bound - self.soft_norm).min(self.difference_bound - self.difference)
    }
}

/// Frobenius bounds on the stacked selection rows of pOMP and Soft-OMP:
/// `||Pi~||_F <= sqrt(n)` and `||Pi - Pi~||_F <= sqrt(2n)(N-1)exp(-g~/tau)`.
pub fn frobenius_bounds_check<T>(
    exact: &SolverTrace<T>,
    soft: &SolverTrace<T>,
    tau: f64,
) -> Result<FrobeniusReport> {
    if exact.kind != SolverKind::POmp || soft.kind != SolverKind::SoftOmp {
        return Err(Error::InvalidArgument(
            "the Frobenius check compares a pOMP trace with a Soft-OMP trace".into(),
        ));
    }
    let n = exact.selected_rows.len().min(soft.selected_rows.len());
    let big_n = exact.sort_targets.first().map_or(0, |v| v.len());
    let soft_gap = soft.sort_targets[..n]
        .iter()
        .map(|v| omp_gap(v))
        .fold(f64::INFINITY, f64::min);
    let mut report = FrobeniusReport {
        n,
        soft_norm: 0.0,
        soft_norm_bound: (n as f64).sqrt(),
        difference: 0.0,
        difference_bound: (2.0 * n as f64).sqrt() * (big_n as f64 - 1.0) * (-soft_gap / tau).exp(),
        soft_gap,
        skipped: None,
    };
    if let Some(i) = first_tracking_mismatch(Family::Omp, exact, soft) {
        report.skipped = Some(format!("row argmax differs at iteration {i}"));
        return Ok(report);
    }
    let mut norm_sq = 0.0;
    let mut diff_sq = 0.0;
    for (p, pt) in exact.selected_rows.iter().zip(&soft.selected_rows).take(n) {
        for (e, s) in p[0].iter().zip(&pt[0]) {
            norm_sq += s * s;
            diff_sq += (e - s) * (e - s);
        }
    }
    report.soft_norm = norm_sq.sqrt();
    report.difference = diff_sq.sqrt();
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleStepReport {
    pub lhs: f64,
    pub rhs: f64,
    pub soft_gap: f64,
    pub skipped: Option<String>,
}

impl SingleStepReport {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// One IHT step from `x` against one Soft-IHT step from `x_tilde`:
/// `||x+ - x~+|| <= 2sN(c_x ||x||_inf + c_y) exp(-g~/tau) + sL ||x - x~||`,
/// which at `eta = 1` with unit columns reads
/// `2sN(s mu ||x||_inf + ||y||) exp(-g~/tau) + sL ||x - x~||`.
pub fn iht_single_step_check<T: Scalar>(
    a: &DenseMatrix<T>,
    y: &[T],
    x: &[T],
    x_tilde: &[T],
    cfg: &SolverConfig,
    tau: f64,
) -> Result<SingleStepReport> {
    let exact_cfg = SolverConfig { tau: None, weights: None, ..cfg.clone() };
    let s = cfg.k;
    let l = shifted_gram_norm(a, cfg.eta)?;
    let plus = iht_step(a, y, x, &exact_cfg)?;
    let soft = soft_iht_step(a, y, x_tilde, &exact_cfg, tau)?;
    let soft_gap = iht_gap(&soft.v);
    let mut report = SingleStepReport {
        lhs: distance(&plus.x, &soft.x),
        rhs: f64::NAN,
        soft_gap,
        skipped: None,
    };
    let g = iht_gap(&plus.v);
    if distance(x, x_tilde) > g / (2.0 * l) {
        report.skipped = Some(format!("||x - x~|| exceeds g/(2L) = {}", g / (2.0 * l)));
        return Ok(report);
    }
    if argsort_desc(&plus.v) != argsort_desc(&soft.v) {
        report.skipped = Some("argsorts differ".into());
        return Ok(report);
    }
    let (cx, cy) = iht_step_scale(a, y, s, cfg.eta)?;
    let sf = s as f64;
    report.rhs = 2.0 * sf * a.cols() as f64 * (cx * linf_norm(x) + cy) * (-soft_gap / tau).exp()
        + sf * l * distance(x, x_tilde);
    Ok(report)
}
