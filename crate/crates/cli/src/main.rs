mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use greedy_unfold::bounds::Family;
use serde::Serialize;

use artifacts::{sha256_hex, Artifacts};
use commands::Context;

#[derive(Parser)]
#[command(name = "greedy-unfold", version, about = "Sparse recovery with differentiable greedy solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed; drawn from entropy and printed when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: config output_dir, else ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads (default: GREEDY_UNFOLD_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Checkpoint to evaluate (exp2-eval; default: <out>/best_checkpoint.json).
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate one problem instance.
    Gen,
    /// Run the configured solver on a generated instance.
    Solve,
    /// Derive a temperature from the tracking bounds and check it.
    VerifyBounds,
    /// Temperature sweep of soft against exact solvers.
    Exp1,
    /// Train OMP-Net or IHT-Net on a weighted-recovery dataset.
    Exp2Train,
    /// Evaluate a trained checkpoint.
    Exp2Eval,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Solve => "solve",
            Command::VerifyBounds => "verify-bounds",
            Command::Exp1 => "exp1",
            Command::Exp2Train => "exp2-train",
            Command::Exp2Eval => "exp2-eval",
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum FamilyArg {
    Omp,
    Iht,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numerical",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<greedy_unfold::Error> for CliError {
    fn from(e: greedy_unfold::Error) -> Self {
        use greedy_unfold::Error as E;
        match e {
            E::InvalidArgument(_) | E::TooManySupports { .. } | E::Io(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io: {e}"))
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    kind: &'a str,
    message: &'a str,
    exit_code: u8,
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("GREEDY_UNFOLD_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("GREEDY_UNFOLD_THREADS is not a thread count: {v:?}"))),
        Err(_) => Ok(None),
    }
}

/// Hash of the resolved config, ignoring where the output goes.
fn config_hash(cfg: &config::RunConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir = None;
    sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = config::load(cli.config.as_deref()).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(n) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let seed = match cli.seed.or(cfg.seed) {
        Some(s) => s,
        None => {
            let s = rand::random::<u64>();
            eprintln!("seed: {s}");
            s
        }
    };
    cfg.seed = Some(seed);
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    cfg.output_dir = Some(out_dir.clone());

    let mut out = Artifacts::create(&out_dir)?;
    let ctx = Context {
        config_hash: config_hash(&cfg),
        cfg,
        seed,
        family: cli.family.map(|f| match f {
            FamilyArg::Omp => Family::Omp,
            FamilyArg::Iht => Family::Iht,
        }),
        quiet: cli.quiet,
        checkpoint: cli.checkpoint.clone(),
    };
    let result = out.write_json("config.resolved.json", &ctx.cfg).map_err(CliError::from).and_then(|_| {
        match cli.command {
            Command::Gen => commands::gen(&ctx, &mut out),
            Command::Solve => commands::solve_cmd(&ctx, &mut out),
            Command::VerifyBounds => commands::verify_bounds(&ctx, &mut out),
            Command::Exp1 => commands::exp1(&ctx, &mut out),
            Command::Exp2Train => commands::exp2_train(&ctx, &mut out),
            Command::Exp2Eval => commands::exp2_eval(&ctx, &mut out),
        }
    });
    if let Err(e) = &result {
        let report = ErrorReport {
            kind: e.kind(),
            message: e.message(),
            exit_code: e.code(),
        };
        let _ = out.write_json("error.json", &report);
    }
    out.finish(cli.command.name(), seed, &ctx.config_hash)?;
    result
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
