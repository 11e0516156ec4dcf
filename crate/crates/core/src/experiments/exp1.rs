use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{log_stats, relative_error};
use super::{derive_seed, generate_typed, InstanceParams, MatrixFamily};
use crate::bounds::Family;
use crate::error::{Error, Result};
use crate::solvers::{solve, SolverConfig, SolverKind, SolverTrace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentOneParams {
    pub instance: InstanceParams,
    pub eta: f64,
    /// IHT thresholding level; defaults to the signal sparsity.
    #[serde(default)]
    pub iht_k: Option<usize>,
    pub tau_grid: Vec<f64>,
    pub omp_iters: Vec<usize>,
    pub iht_iters: Vec<usize>,
    pub n_trials: usize,
}

impl Default for ExperimentOneParams {
    fn default() -> Self {
        Self {
            instance: InstanceParams {
                n: 400,
                m: 200,
                s: 15,
                sigma: 1e-3,
                family: MatrixFamily::Gaussian,
                superset_factor: None,
                normalize_columns: false,
            },
            eta: 0.6,
            iht_k: None,
            tau_grid: (0..8).map(|e| 10f64.powi(-e)).collect(),
            omp_iters: vec![5, 15, 30],
            iht_iters: vec![1, 15, 45],
            n_trials: 20,
        }
    }
}

impl ExperimentOneParams {
    pub fn validate(&self) -> Result<()> {
        self.instance.validate()?;
        if self.instance.family != MatrixFamily::Gaussian {
            return Err(Error::InvalidArgument("the temperature sweep uses Gaussian matrices".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::InvalidArgument("need at least one trial".into()));
        }
        if self.tau_grid.is_empty() || self.tau_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidArgument("temperatures must be positive and finite".into()));
        }
        if self.tau_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument("the temperature grid must be strictly descending".into()));
        }
        if self.omp_iters.iter().chain(&self.iht_iters).any(|&n| n == 0) {
            return Err(Error::InvalidArgument("iteration counts must be positive".into()));
        }
        Ok(())
    }

    fn iters(&self, family: Family) -> &[usize] {
        match family {
            Family::Omp => &self.omp_iters,
            Family::Iht => &self.iht_iters,
        }
    }

    fn config(&self, family: Family) -> SolverConfig {
        let max_n = self.iters(family).iter().copied().max().unwrap_or(0);
        match family {
            Family::Omp => SolverConfig::omp(max_n),
            Family::Iht => SolverConfig::iht(self.iht_k.unwrap_or(self.instance.s), self.eta, max_n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exp1Error {
    pub family: Family,
    pub trial: usize,
    pub n_iter: usize,
    pub tau: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exp1Stat {
    pub family: Family,
    pub n_iter: usize,
    pub tau: f64,
    pub log_mean: f64,
    pub log_std: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub std_defined: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOneResult {
    pub errors: Vec<Exp1Error>,
    pub stats: Vec<Exp1Stat>,
}

const TRIAL_STREAM: u64 = 10;

/// Errors of one trial, indexed `[tau][n]`; `None` marks a failed solve.
fn run_trial(
    params: &ExperimentOneParams,
    family: Family,
    seed: u64,
    trial: usize,
) -> Vec<Vec<Option<f64>>> {
    let iters = params.iters(family);
    let failed = vec![vec![None; iters.len()]; params.tau_grid.len()];
    let Ok(inst) = generate_typed::<f64>(&params.instance, derive_seed(seed, &[TRIAL_STREAM, trial as u64])) else {
        return failed;
    };
    let (exact_kind, soft_kind) = match family {
        Family::Omp => (SolverKind::POmp, SolverKind::SoftOmp),
        Family::Iht => (SolverKind::PIht, SolverKind::SoftIht),
    };
    let cfg = params.config(family);
    let Ok(exact) = solve(exact_kind, &inst.a, &inst.y, &cfg) else {
        return failed;
    };
    let at = |t: &SolverTrace<f64>, n: usize| t.iterates.get(n).cloned();
    params
        .tau_grid
        .iter()
        .map(|&tau| match solve(soft_kind, &inst.a, &inst.y, &cfg.clone().with_tau(tau)) {
            Ok(soft) => iters
                .iter()
                .map(|&n| {
                    let (x, xt) = (at(&exact, n)?, at(&soft, n)?);
                    Some(relative_error(&xt, &x)).filter(|e| e.is_finite())
                })
                .collect(),
            Err(_) => vec![None; iters.len()],
        })
        .collect()
}

/// Temperature sweep comparing each exact solver with its soft counterpart
/// on `n_trials` fresh Gaussian instances.
pub fn experiment_one(params: &ExperimentOneParams, families: &[Family], seed: u64) -> Result<ExperimentOneResult> {
    params.validate()?;
    let mut result = ExperimentOneResult::default();
    for &family in families {
        let iters = params.iters(family);
        let trials: Vec<_> = (0..params.n_trials)
            .into_par_iter()
            .map(|t| run_trial(params, family, seed, t))
            .collect();
        for (trial, grid) in trials.iter().enumerate() {
            for (ti, row) in grid.iter().enumerate() {
                for (ni, e) in row.iter().enumerate() {
                    if let Some(e) = e {
                        result.errors.push(Exp1Error {
                            family,
                            trial,
                            n_iter: iters[ni],
                            tau: params.tau_grid[ti],
                            rel_error: *e,
                        });
                    }
                }
            }
        }
        for (ni, &n_iter) in iters.iter().enumerate() {
            for (ti, &tau) in params.tau_grid.iter().enumerate() {
                let ok: Vec<f64> = trials.iter().filter_map(|g| g[ti][ni]).collect();
                let n_failed = trials.len() - ok.len();
                let (log_mean, log_std, std_defined) = if ok.is_empty() {
                    (f64::NAN, f64::NAN, false)
                } else {
                    let s = log_stats(&ok);
                    (s.log_mean, s.log_std, s.std_defined)
                };
                result.stats.push(Exp1Stat {
                    family,
                    n_iter,
                    tau,
                    log_mean,
                    log_std,
                    n_ok: ok.len(),
                    n_failed,
                    std_defined,
                });
            }
        }
    }
    Ok(result)
}
