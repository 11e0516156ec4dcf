use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{relative_error, BoxplotSummary};
use super::{stream, Dataset, Sample};
use crate::autodiff::{forward_backward, net_output, NetFamily, NetSpec};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SupportSet};
use crate::scalar::{distance, Scalar};
use crate::solvers::{solve, SolverConfig, SolverKind};
use crate::sortops::argsort_desc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub family: NetFamily,
    pub layers: usize,
    pub tau: f64,
    /// IHT-Net step size.
    pub eta: f64,
    /// IHT-Net thresholding level.
    pub k: usize,
    pub learning_rate: f64,
    pub n_epoch: usize,
    pub n_checkpt: usize,
    pub batch_size: usize,
    pub clip_max_norm: f64,
    pub rms_decay: f64,
    pub rms_eps: f64,
}

impl TrainConfig {
    pub fn omp_default() -> Self {
        Self {
            family: NetFamily::Omp,
            layers: 10,
            tau: 1e-3,
            eta: 1.0,
            k: 10,
            learning_rate: 1e-2,
            n_epoch: 1000,
            n_checkpt: 10,
            batch_size: 64,
            clip_max_norm: 1.0,
            rms_decay: 0.9,
            rms_eps: 1e-8,
        }
    }

    pub fn iht_default(k: usize) -> Self {
        Self {
            family: NetFamily::Iht,
            layers: 30,
            eta: 0.5,
            k,
            ..Self::omp_default()
        }
    }

    pub fn net(&self) -> NetSpec {
        match self.family {
            NetFamily::Omp => NetSpec::omp(self.layers, self.tau),
            NetFamily::Iht => NetSpec::iht(self.layers, self.k, self.eta, self.tau),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.layers == 0 || self.batch_size == 0 || self.n_checkpt == 0 {
            return bad("layers, batch_size and n_checkpt must be positive");
        }
        if !(self.tau > 0.0) || !(self.learning_rate >= 0.0) {
            return bad("tau must be positive and learning_rate nonnegative");
        }
        if !(self.clip_max_norm > 0.0) {
            return bad("clip_max_norm must be positive");
        }
        if !(0.0..1.0).contains(&self.rms_decay) || !(self.rms_eps > 0.0) {
            return bad("rms_decay must lie in [0, 1) and rms_eps be positive");
        }
        if self.family == NetFamily::Iht && (self.k == 0 || !(self.eta > 0.0)) {
            return bad("IHT-Net needs k >= 1 and a positive step size");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mse_train: f64,
    pub mse_val: f64,
    /// Mean unclipped batch-gradient norm over the epoch (0 at epoch 0).
    pub grad_norm: f64,
    pub checkpointed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: usize,
    pub mse_train: f64,
    pub mse_val: f64,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Weights after the last step.
    pub w: Vec<f64>,
    pub accumulator: Vec<f64>,
    pub epoch: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub best_checkpoint: usize,
    pub log: Vec<EpochLog>,
}

impl TrainState {
    /// The selected model: the checkpoint with the lowest training MSE.
    pub fn best(&self) -> &Checkpoint {
        &self.checkpoints[self.best_checkpoint]
    }
}

fn squared_error<T: Scalar>(x: &[T], x_true: &[T]) -> f64 {
    let d = distance(x, x_true);
    d * d
}

/// Mean squared error of the network over `samples`.
pub fn mse<T: Scalar>(net: &NetSpec, w: &[f64], a: &DenseMatrix<T>, samples: &[Sample<T>]) -> Result<f64> {
    let losses: Vec<f64> = samples
        .par_iter()
        .map(|s| net_output(net, w, a, &s.y).map(|x| squared_error(&x, &s.x)))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / samples.len() as f64)
}

const SHUFFLE_STREAM: u64 = 20;

/// Trains the shared weights from the all-ones start.
pub fn train_network<T: Scalar>(
    data: &Dataset<T>,
    cfg: &TrainConfig,
    seed: u64,
    on_epoch: Option<&mut dyn FnMut(&EpochLog)>,
) -> Result<TrainState> {
    train_from(data, cfg, vec![1.0; data.a.cols()], seed, on_epoch)
}

/// Mini-batch RMSprop with global-norm clipping and projection onto `w >= 0`.
/// Checkpoints are taken at epoch 0 and every `n_checkpt` epochs.
pub fn train_from<T: Scalar>(
    data: &Dataset<T>,
    cfg: &TrainConfig,
    w0: Vec<f64>,
    seed: u64,
    mut on_epoch: Option<&mut dyn FnMut(&EpochLog)>,
) -> Result<TrainState> {
    cfg.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be nonempty".into()));
    }
    let net = cfg.net();
    let a = &data.a;
    let n = a.cols();
    let mut state = TrainState {
        w: w0,
        accumulator: vec![0.0; n],
        epoch: 0,
        checkpoints: Vec::new(),
        best_checkpoint: 0,
        log: Vec::new(),
    };
    let mut record = |state: &mut TrainState, epoch: usize, grad_norm: f64| -> Result<()> {
        let mse_train = mse(&net, &state.w, a, &data.train)?;
        let mse_val = mse(&net, &state.w, a, &data.val)?;
        if !mse_train.is_finite() {
            return Err(Error::Diverged { epoch, batch: 0, loss: mse_train });
        }
        let checkpointed = epoch % cfg.n_checkpt == 0;
        if checkpointed {
            state.checkpoints.push(Checkpoint {
                epoch,
                mse_train,
                mse_val,
                weights: state.w.clone(),
            });
            let best = state.best().mse_train;
            if mse_train < best {
                state.best_checkpoint = state.checkpoints.len() - 1;
            }
        }
        let entry = EpochLog {
            epoch,
            mse_train,
            mse_val,
            grad_norm,
            checkpointed,
        };
        if let Some(f) = on_epoch.as_mut() {
            f(&entry);
        }
        state.log.push(entry);
        Ok(())
    };
    record(&mut state, 0, 0.0)?;

    let mut order: Vec<usize> = (0..data.train.len()).collect();
    for epoch in 1..=cfg.n_epoch {
        order.sort_unstable();
        order.shuffle(&mut stream(seed, &[SHUFFLE_STREAM, epoch as u64]));
        let mut norm_sum = 0.0;
        let mut n_batches = 0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let results: Vec<_> = idx
                .par_iter()
                .map(|&i| {
                    let s = &data.train[i];
                    forward_backward(&net, &state.w, a, &s.y, &s.x).map_err(|e| match e {
                        Error::NonFinite { .. } => Error::Diverged { epoch, batch, loss: f64::NAN },
                        e => e,
                    })
                })
                .collect::<Result<_>>()?;
            let scale = 1.0 / idx.len() as f64;
            let mut grad = vec![0.0; n];
            let mut loss = 0.0;
            for r in &results {
                loss += r.loss * scale;
                for (g, gi) in grad.iter_mut().zip(&r.grad_w) {
                    *g += gi * scale;
                }
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, batch, loss });
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            norm_sum += norm;
            n_batches += 1;
            if norm > cfg.clip_max_norm {
                let c = cfg.clip_max_norm / norm;
                grad.iter_mut().for_each(|g| *g *= c);
            }
            for ((w, v), g) in state.w.iter_mut().zip(&mut state.accumulator).zip(&grad) {
                *v = cfg.rms_decay * *v + (1.0 - cfg.rms_decay) * g * g;
                *w -= cfg.learning_rate * g / (v.sqrt() + cfg.rms_eps);
                *w = w.max(0.0);
            }
        }
        state.epoch = epoch;
        record(&mut state, epoch, norm_sum / n_batches as f64)?;
    }
    Ok(state)
}

/// 1 on `superset`, 0 elsewhere.
pub fn oracle_weights(superset: &SupportSet, n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for &j in superset.indices() {
        w[j] = 1.0;
    }
    w
}

/// Fraction of `superset` found among the `|superset|` largest weights.
pub fn top_weight_overlap(w: &[f64], superset: &SupportSet) -> f64 {
    let top = &argsort_desc(w).order[..superset.len()];
    top.iter().filter(|&&j| superset.contains(j)).count() as f64 / superset.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub index: usize,
    pub oracle_weight: f64,
    pub learned_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rel_errors: Vec<f64>,
    pub summary: BoxplotSummary,
    pub mse: f64,
    pub weights: Vec<WeightRow>,
}

/// Per-sample relative errors of the network on `samples`, plus the
/// oracle/learned weight comparison.
pub fn evaluate_network<T: Scalar>(
    net: &NetSpec,
    w: &[f64],
    a: &DenseMatrix<T>,
    superset: Option<&SupportSet>,
    samples: &[Sample<T>],
) -> Result<Evaluation> {
    let outputs: Vec<Vec<T>> = samples
        .par_iter()
        .map(|s| net_output(net, w, a, &s.y))
        .collect::<Result<_>>()?;
    let oracle = superset.map(|t| oracle_weights(t, a.cols()));
    Ok(summarize(&outputs, samples, w, oracle))
}

fn summarize<T: Scalar>(outputs: &[Vec<T>], samples: &[Sample<T>], w: &[f64], oracle: Option<Vec<f64>>) -> Evaluation {
    let rel_errors: Vec<f64> = outputs.iter().zip(samples).map(|(x, s)| relative_error(x, &s.x)).collect();
    let mse = outputs.iter().zip(samples).map(|(x, s)| squared_error(x, &s.x)).sum::<f64>() / samples.len() as f64;
    let weights = w
        .iter()
        .enumerate()
        .map(|(index, &learned_weight)| WeightRow {
            index,
            oracle_weight: oracle.as_ref().map_or(f64::NAN, |o| o[index]),
            learned_weight,
        })
        .collect();
    Evaluation {
        summary: BoxplotSummary::new(&rel_errors),
        rel_errors,
        mse,
        weights,
    }
}

/// Relative errors of plain OMP (`k` iterations) or IHT (`n_iter` steps).
pub fn classical_errors<T: Scalar>(
    kind: SolverKind,
    cfg: &SolverConfig,
    a: &DenseMatrix<T>,
    samples: &[Sample<T>],
) -> Result<Vec<f64>> {
    samples
        .par_iter()
        .map(|s| solve(kind, a, &s.y, cfg).map(|t| relative_error(t.output(), &s.x)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_weight_examples() {
        let t = SupportSet::new(vec![0, 2], 4).unwrap();
        assert_eq!(oracle_weights(&t, 4), vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(oracle_weights(&SupportSet::full(3), 3), vec![1.0; 3]);
        assert_eq!(top_weight_overlap(&[0.9, 0.1, 0.5, 0.7], &t), 0.5);
    }
}
