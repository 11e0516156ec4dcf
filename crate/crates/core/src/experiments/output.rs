//! CSV tables and checkpoint documents. Floats use Rust's shortest
//! round-trip formatting so identical values always print identically.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::exp1::{Exp1Error, Exp1Stat};
use super::exp2::{Checkpoint, EpochLog, WeightRow};
use crate::bounds::Family;
use crate::error::Result;

pub const EXP1_ERRORS_HEADER: [&str; 5] = ["family", "trial", "n_iter", "tau", "rel_error"];
pub const EXP1_STATS_HEADER: [&str; 7] = ["family", "n_iter", "tau", "log_mean", "log_std", "n_ok", "n_failed"];
pub const TRAINING_LOG_HEADER: [&str; 5] = ["epoch", "mse_train", "mse_val", "grad_norm", "checkpointed"];
pub const WEIGHTS_HEADER: [&str; 3] = ["index", "oracle_weight", "learned_weight"];
pub const BOXPLOT_HEADER: [&str; 2] = ["sample", "rel_error"];

fn family(f: Family) -> &'static str {
    match f {
        Family::Omp => "omp",
        Family::Iht => "iht",
    }
}

fn table<W: Write, const H: usize>(out: W, header: [&str; H], rows: impl Iterator<Item = [String; H]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_exp1_errors<W: Write>(out: W, rows: &[Exp1Error]) -> Result<()> {
    table(
        out,
        EXP1_ERRORS_HEADER,
        rows.iter().map(|r| {
            [
                family(r.family).into(),
                r.trial.to_string(),
                r.n_iter.to_string(),
                r.tau.to_string(),
                r.rel_error.to_string(),
            ]
        }),
    )
}

pub fn write_exp1_stats<W: Write>(out: W, rows: &[Exp1Stat]) -> Result<()> {
    table(
        out,
        EXP1_STATS_HEADER,
        rows.iter().map(|r| {
            [
                family(r.family).into(),
                r.n_iter.to_string(),
                r.tau.to_string(),
                r.log_mean.to_string(),
                r.log_std.to_string(),
                r.n_ok.to_string(),
                r.n_failed.to_string(),
            ]
        }),
    )
}

pub fn write_training_log<W: Write>(out: W, rows: &[EpochLog]) -> Result<()> {
    table(
        out,
        TRAINING_LOG_HEADER,
        rows.iter().map(|r| {
            [
                r.epoch.to_string(),
                r.mse_train.to_string(),
                r.mse_val.to_string(),
                r.grad_norm.to_string(),
                r.checkpointed.to_string(),
            ]
        }),
    )
}

pub fn write_weights<W: Write>(out: W, rows: &[WeightRow]) -> Result<()> {
    table(
        out,
        WEIGHTS_HEADER,
        rows.iter().map(|r| {
            [
                r.index.to_string(),
                r.oracle_weight.to_string(),
                r.learned_weight.to_string(),
            ]
        }),
    )
}

pub fn write_boxplot<W: Write>(out: W, rel_errors: &[f64]) -> Result<()> {
    table(
        out,
        BOXPLOT_HEADER,
        rel_errors.iter().enumerate().map(|(i, e)| [i.to_string(), e.to_string()]),
    )
}

/// On-disk checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointFile {
    pub epoch: usize,
    pub mse_train: f64,
    pub weights: Vec<f64>,
    pub config_hash: String,
}

impl CheckpointFile {
    pub fn new(c: &Checkpoint, config_hash: &str) -> Self {
        Self {
            epoch: c.epoch,
            mse_train: c.mse_train,
            weights: c.weights.clone(),
            config_hash: config_hash.into(),
        }
    }
}
