use std::path::{Path, PathBuf};

use greedy_unfold::autodiff::NetFamily;
use greedy_unfold::bounds::{Family, VerifyOptions};
use greedy_unfold::experiments::{ExperimentOneParams, InstanceParams, MatrixFamily, TrainConfig};
use greedy_unfold::solvers::{SolverConfig, SolverKind};
use serde::{Deserialize, Serialize};

/// Everything a run can be configured with. Every field has a default, and
/// unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub instance: InstanceSection,
    pub solver: SolverSection,
    pub verify: VerifyOptions,
    pub exp1: Exp1Section,
    pub exp2: Exp2Section,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            output_dir: None,
            instance: InstanceSection::default(),
            solver: SolverSection::default(),
            verify: VerifyOptions::default(),
            exp1: Exp1Section::default(),
            exp2: Exp2Section::default(),
        }
    }
}

/// Single-instance parameters for `gen`, `solve` and `verify-bounds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceSection {
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub sigma: f64,
    pub matrix: MatrixFamily,
    pub superset_factor: Option<usize>,
    pub normalize_columns: bool,
}

impl Default for InstanceSection {
    fn default() -> Self {
        Self {
            n: 60,
            m: 30,
            s: 4,
            sigma: 0.0,
            matrix: MatrixFamily::Gaussian,
            superset_factor: None,
            normalize_columns: true,
        }
    }
}

impl InstanceSection {
    pub fn params(&self) -> InstanceParams {
        InstanceParams {
            n: self.n,
            m: self.m,
            s: self.s,
            sigma: self.sigma,
            family: self.matrix,
            superset_factor: self.superset_factor,
            normalize_columns: self.normalize_columns,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Used by `solve`; `verify-bounds` takes the family from `--family`.
    pub algorithm: SolverKind,
    /// Sparsity level; defaults to the instance sparsity.
    pub k: Option<usize>,
    pub eta: f64,
    pub n_iter: usize,
    pub tau: Option<f64>,
    pub weights: Option<Vec<f64>>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            algorithm: SolverKind::Omp,
            k: None,
            eta: 1.0,
            n_iter: 6,
            tau: None,
            weights: None,
        }
    }
}

impl SolverSection {
    pub fn config(&self, kind: SolverKind, s: usize) -> SolverConfig {
        let k = self.k.unwrap_or(s);
        let base = if kind.is_omp_family() {
            SolverConfig::omp(k)
        } else {
            SolverConfig::iht(k, self.eta, self.n_iter)
        };
        SolverConfig {
            tau: if kind.is_soft() { self.tau } else { None },
            weights: self.weights.clone(),
            ..base
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Exp1Section {
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub sigma: f64,
    pub eta: f64,
    pub iht_k: Option<usize>,
    pub tau_grid: Vec<f64>,
    pub omp_iters: Vec<usize>,
    pub iht_iters: Vec<usize>,
    pub n_trials: usize,
}

impl Default for Exp1Section {
    fn default() -> Self {
        let p = ExperimentOneParams::default();
        Self {
            n: p.instance.n,
            m: p.instance.m,
            s: p.instance.s,
            sigma: p.instance.sigma,
            eta: p.eta,
            iht_k: p.iht_k,
            tau_grid: p.tau_grid,
            omp_iters: p.omp_iters,
            iht_iters: p.iht_iters,
            n_trials: p.n_trials,
        }
    }
}

impl Exp1Section {
    pub fn params(&self) -> ExperimentOneParams {
        ExperimentOneParams {
            instance: InstanceParams {
                n: self.n,
                m: self.m,
                s: self.s,
                sigma: self.sigma,
                family: MatrixFamily::Gaussian,
                superset_factor: None,
                normalize_columns: false,
            },
            eta: self.eta,
            iht_k: self.iht_k,
            tau_grid: self.tau_grid.clone(),
            omp_iters: self.omp_iters.clone(),
            iht_iters: self.iht_iters.clone(),
            n_trials: self.n_trials,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Exp2Section {
    pub n: usize,
    pub s: usize,
    pub sigma: f64,
    pub superset_factor: usize,
    pub m_omp: usize,
    pub m_iht: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub omp_layers: usize,
    pub iht_layers: usize,
    /// IHT-Net thresholding level; defaults to `s`.
    pub iht_k: Option<usize>,
    pub eta: f64,
    pub tau: f64,
    pub learning_rate: f64,
    pub n_epoch: usize,
    pub n_checkpt: usize,
    pub batch_size: usize,
    pub clip_max_norm: f64,
    pub rms_decay: f64,
    pub rms_eps: f64,
    /// Classical baselines: OMP runs `s` iterations, IHT this many.
    pub baseline_iht_iters: usize,
}

impl Default for Exp2Section {
    fn default() -> Self {
        let t = TrainConfig::omp_default();
        Self {
            n: 256,
            s: 10,
            sigma: 1e-3,
            superset_factor: 2,
            m_omp: 22,
            m_iht: 36,
            n_train: 1024,
            n_val: 512,
            omp_layers: 10,
            iht_layers: 30,
            iht_k: None,
            eta: 0.5,
            tau: t.tau,
            learning_rate: t.learning_rate,
            n_epoch: t.n_epoch,
            n_checkpt: t.n_checkpt,
            batch_size: t.batch_size,
            clip_max_norm: t.clip_max_norm,
            rms_decay: t.rms_decay,
            rms_eps: t.rms_eps,
            baseline_iht_iters: 30,
        }
    }
}

impl Exp2Section {
    pub fn instance(&self, family: Family) -> InstanceParams {
        InstanceParams {
            n: self.n,
            m: match family {
                Family::Omp => self.m_omp,
                Family::Iht => self.m_iht,
            },
            s: self.s,
            sigma: self.sigma,
            family: MatrixFamily::Fourier,
            superset_factor: Some(self.superset_factor),
            normalize_columns: false,
        }
    }

    pub fn train(&self, family: Family) -> TrainConfig {
        let (net, layers) = match family {
            Family::Omp => (NetFamily::Omp, self.omp_layers),
            Family::Iht => (NetFamily::Iht, self.iht_layers),
        };
        TrainConfig {
            family: net,
            layers,
            tau: self.tau,
            eta: if family == Family::Iht { self.eta } else { 1.0 },
            k: self.iht_k.unwrap_or(self.s),
            learning_rate: self.learning_rate,
            n_epoch: self.n_epoch,
            n_checkpt: self.n_checkpt,
            batch_size: self.batch_size,
            clip_max_norm: self.clip_max_norm,
            rms_decay: self.rms_decay,
            rms_eps: self.rms_eps,
        }
    }

    pub fn baseline(&self, family: Family) -> (SolverKind, SolverConfig) {
        match family {
            Family::Omp => (SolverKind::Omp, SolverConfig::omp(self.s)),
            Family::Iht => (
                SolverKind::Iht,
                SolverConfig::iht(self.iht_k.unwrap_or(self.s), self.eta, self.baseline_iht_iters),
            ),
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Read(PathBuf, std::io::Error),
    Parse(PathBuf, serde_json::Error),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Read(p, e) => write!(f, "cannot read config {}: {e}", p.display()),
            ConfigError::Parse(p, e) => write!(f, "invalid config {}: {e}", p.display()),
        }
    }
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, ConfigError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.into(), e))?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Parse(path.into(), e))
}
