use std::path::PathBuf;

use greedy_unfold::bounds::{verify_theorem, Family};
use greedy_unfold::experiments::output::{
    write_boxplot, write_exp1_errors, write_exp1_stats, write_training_log, write_weights,
    CheckpointFile,
};
use greedy_unfold::experiments::{
    classical_errors, evaluate_network, experiment_one, generate_dataset, generate_instance,
    oracle_weights, relative_error, top_weight_overlap, train_network, AnyInstance, BoxplotSummary,
    Dataset, EpochLog, Evaluation, TrainConfig,
};
use greedy_unfold::linalg::SupportSet;
use greedy_unfold::scalar::{Complex64, Scalar};
use greedy_unfold::solvers::{solve, SolverConfig, SolverKind};
use serde::Serialize;

use crate::artifacts::Artifacts;
use crate::config::RunConfig;
use crate::CliError;

pub struct Context {
    pub cfg: RunConfig,
    pub seed: u64,
    pub family: Option<Family>,
    pub quiet: bool,
    pub config_hash: String,
    pub checkpoint: Option<PathBuf>,
}

impl Context {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> greedy_unfold::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn gen(ctx: &Context, out: &mut Artifacts) -> Result<(), CliError> {
    let inst = generate_instance(&ctx.cfg.instance.params(), ctx.seed)?;
    out.write_json("instance.json", &inst)?;
    ctx.say(format!("wrote {}", out.root().join("instance.json").display()));
    Ok(())
}

#[derive(Serialize)]
struct Solution<T> {
    algorithm: SolverKind,
    x: Vec<T>,
    support_one_based: Vec<usize>,
    rel_error: f64,
    residual_norm: f64,
}

fn solve_typed<T: Scalar>(
    ctx: &Context,
    out: &mut Artifacts,
    a: &greedy_unfold::linalg::DenseMatrix<T>,
    y: &[T],
    x_true: &[T],
) -> Result<(), CliError> {
    let kind = ctx.cfg.solver.algorithm;
    let cfg = ctx.cfg.solver.config(kind, ctx.cfg.instance.s);
    let trace = solve(kind, a, y, &cfg)?;
    let x = trace.output().to_vec();
    let solution = Solution {
        algorithm: kind,
        support_one_based: SupportSet::of_vector(&x).one_based(),
        rel_error: relative_error(&x, x_true),
        residual_norm: *trace.residual_norms.last().unwrap_or(&f64::NAN),
        x,
    };
    ctx.say(format!("{kind:?}: relative error {:e}", solution.rel_error));
    out.write_json("trace.json", &trace)?;
    out.write_json("solution.json", &solution)?;
    Ok(())
}

pub fn solve_cmd(ctx: &Context, out: &mut Artifacts) -> Result<(), CliError> {
    match generate_instance(&ctx.cfg.instance.params(), ctx.seed)? {
        AnyInstance::Real(i) => solve_typed(ctx, out, &i.a, &i.y, &i.x_true),
        AnyInstance::Complex(i) => solve_typed(ctx, out, &i.a, &i.y, &i.x_true),
    }
}

pub fn verify_bounds(ctx: &Context, out: &mut Artifacts) -> Result<(), CliError> {
    let family = ctx.family.unwrap_or(Family::Omp);
    let kind = match family {
        Family::Omp => SolverKind::POmp,
        Family::Iht => SolverKind::PIht,
    };
    let cfg = SolverConfig {
        weights: None,
        ..ctx.cfg.solver.config(kind, ctx.cfg.instance.s)
    };
    let report = match generate_instance(&ctx.cfg.instance.params(), ctx.seed)? {
        AnyInstance::Real(i) => verify_theorem(family, &i.a, &i.y, &cfg, &ctx.cfg.verify)?,
        AnyInstance::Complex(i) => verify_theorem(family, &i.a, &i.y, &cfg, &ctx.cfg.verify)?,
    };
    out.write_json("bound_report.json", &report)?;
    ctx.say(format!(
        "{family:?}: precondition_ok={} tau={:?} observed={:?} eps={:e} satisfied={}",
        report.precondition_ok, report.tau_used, report.observed_max_error, report.epsilon, report.satisfied
    ));
    if report.precondition_ok && !report.satisfied {
        return Err(CliError::Numeric(
            "soft iterates left the epsilon tube at the derived temperature".into(),
        ));
    }
    Ok(())
}

pub fn exp1(ctx: &Context, out: &mut Artifacts) -> Result<(), CliError> {
    let families: Vec<Family> = match ctx.family {
        Some(f) => vec![f],
        None => vec![Family::Omp, Family::Iht],
    };
    let result = experiment_one(&ctx.cfg.exp1.params(), &families, ctx.seed)?;
    out.write("exp1_errors.csv", &csv_bytes(|b| write_exp1_errors(b, &result.errors))?)?;
    out.write("exp1_stats.csv", &csv_bytes(|b| write_exp1_stats(b, &result.stats))?)?;
    for s in &result.stats {
        ctx.say(format!(
            "{:?} n={:<3} tau={:<8e} log10 mean {:>7.2} std {:.2} ({} ok, {} failed)",
            s.family, s.n_iter, s.tau, s.log_mean, s.log_std, s.n_ok, s.n_failed
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct Exp2Summary {
    family: Family,
    checkpoint_epoch: usize,
    mse_val_epoch0: Option<f64>,
    mse_val_best: Option<f64>,
    mse_val: f64,
    median_rel_error: f64,
    classical_median_rel_error: f64,
    top_weight_overlap: f64,
    network: BoxplotSummary,
    classical: BoxplotSummary,
}

fn dataset(ctx: &Context, family: Family) -> Result<Dataset<Complex64>, CliError> {
    let e = &ctx.cfg.exp2;
    Ok(generate_dataset(&e.instance(family), e.n_train, e.n_val, ctx.seed)?)
}

fn write_evaluation(
    ctx: &Context,
    out: &mut Artifacts,
    family: Family,
    data: &Dataset<Complex64>,
    train: &TrainConfig,
    weights: &[f64],
) -> Result<(Evaluation, Vec<f64>), CliError> {
    let superset = data.superset.as_ref().expect("experiment II draws a superset");
    let eval = evaluate_network(&train.net(), weights, &data.a, Some(superset), &data.val)?;
    let (kind, cfg) = ctx.cfg.exp2.baseline(family);
    let classical = classical_errors(kind, &cfg, &data.a, &data.val)?;
    out.write("weights.csv", &csv_bytes(|b| write_weights(b, &eval.weights))?)?;
    out.write("eval_boxplot.csv", &csv_bytes(|b| write_boxplot(b, &eval.rel_errors))?)?;
    out.write("baseline_boxplot.csv", &csv_bytes(|b| write_boxplot(b, &classical))?)?;
    debug_assert_eq!(oracle_weights(superset, data.a.cols()).len(), weights.len());
    Ok((eval, classical))
}

fn summary(
    family: Family,
    epoch: usize,
    eval: &Evaluation,
    classical: &[f64],
    weights: &[f64],
    superset: &SupportSet,
    mse_val_epoch0: Option<f64>,
    mse_val_best: Option<f64>,
) -> Exp2Summary {
    let classical = BoxplotSummary::new(classical);
    Exp2Summary {
        family,
        checkpoint_epoch: epoch,
        mse_val_epoch0,
        mse_val_best,
        mse_val: eval.mse,
        median_rel_error: eval.summary.median,
        classical_median_rel_error: classical.median,
        top_weight_overlap: top_weight_overlap(weights, superset),
        network: eval.summary.clone(),
        classical,
    }
}

pub fn exp2_train(ctx: &Context, out: &mut Artifacts) -> Result<(), CliError> {
    let family = ctx.family.unwrap_or(Family::Omp);
    let data = dataset(ctx, family)?;
    let train = ctx.cfg.exp2.train(family);
    let mut progress = |e: &EpochLog| {
        ctx.say(format!(
            "epoch {:>4}  mse_train {:.4e}  mse_val {:.4e}  grad {:.3e}{}",
            e.epoch,
            e.mse_train,
            e.mse_val,
            e.grad_norm,
            if e.checkpointed { "  *" } else { "" }
        ))
    };
    let state = train_network(&data, &train, ctx.seed, Some(&mut progress))?;
    out.write("training_log.csv", &csv_bytes(|b| write_training_log(b, &state.log))?)?;
    for c in &state.checkpoints {
        out.write_json(
            &format!("checkpoints/epoch_{:05}.json", c.epoch),
            &CheckpointFile::new(c, &ctx.config_hash),
        )?;
    }
    let best = state.best();
    out.write_json("best_checkpoint.json", &CheckpointFile::new(best, &ctx.config_hash))?;
    let (eval, classical) = write_evaluation(ctx, out, family, &data, &train, &best.weights)?;
    let s = summary(
        family,
        best.epoch,
        &eval,
        &classical,
        &best.weights,
        data.superset.as_ref().expect("superset"),
        Some(state.log[0].mse_val),
        Some(best.mse_val),
    );
    ctx.say(format!(
        "best epoch {}: median rel error {:.3e} (classical {:.3e}), top-weight overlap {:.2}",
        s.checkpoint_epoch, s.median_rel_error, s.classical_median_rel_error, s.top_weight_overlap
    ));
    out.write_json("summary.json", &s)?;
    Ok(())
}

pub fn exp2_eval(ctx: &Context, out: &mut Artifacts) -> Result<(), CliError> {
    let family = ctx.family.unwrap_or(Family::Omp);
    let path = ctx
        .checkpoint
        .clone()
        .unwrap_or_else(|| out.root().join("best_checkpoint.json"));
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read checkpoint {}: {e}", path.display())))?;
    let ckpt: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid checkpoint {}: {e}", path.display())))?;
    if ckpt.config_hash != ctx.config_hash {
        eprintln!("warning: checkpoint was trained under a different config ({})", ckpt.config_hash);
    }
    let data = dataset(ctx, family)?;
    if ckpt.weights.len() != data.a.cols() {
        return Err(CliError::Config(format!(
            "checkpoint has {} weights, the dataset has {} columns",
            ckpt.weights.len(),
            data.a.cols()
        )));
    }
    let train = ctx.cfg.exp2.train(family);
    let (eval, classical) = write_evaluation(ctx, out, family, &data, &train, &ckpt.weights)?;
    let s = summary(
        family,
        ckpt.epoch,
        &eval,
        &classical,
        &ckpt.weights,
        data.superset.as_ref().expect("superset"),
        None,
        None,
    );
    ctx.say(format!(
        "median rel error {:.3e} (classical {:.3e}), top-weight overlap {:.2}",
        s.median_rel_error, s.classical_median_rel_error, s.top_weight_overlap
    ));
    out.write_json("eval_summary.json", &s)?;
    Ok(())
}
