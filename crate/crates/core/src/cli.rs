//! Command-line harness: tune analytic functions (`bench`) or the
//! red-black Gauss–Seidel chunk sizes (`rbgs`), writing a per-evaluation
//! trace and a summary.
//!
//! Trace format: CSV with header `eval_index,point_0,..,cost,best_cost`, or
//! one JSON object per line with the same keys. The trace goes to
//! `--output-path` (standard output by default). The summary is a single
//! JSON line on standard output when the trace goes to a file, otherwise on
//! standard error.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::csa::Csa;
use crate::error::Error;
use crate::functions;
use crate::nelder_mead::NelderMead;
use crate::optimizer::NumericalOptimizer;
use crate::rbgs::{self, ChunkConfig, Grid, OptimizerChoice, Sweeper, TuningParams};
use crate::session::{PointKind, TraceRecord, TuningSession};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "autotune",
    version,
    about = "Runtime parameter auto-tuning harness"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tune an analytic function through the caller-supplied cost path.
    Bench(BenchArgs),
    /// Tune the chunk sizes of the parallel red-black Gauss-Seidel solver.
    Rbgs(RbgsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerKind {
    Csa,
    Nm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Function {
    Sphere,
    Rosenbrock,
    Rastrigin,
}

impl Function {
    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            Function::Sphere => functions::sphere(x),
            Function::Rosenbrock => functions::rosenbrock(x),
            Function::Rastrigin => functions::rastrigin(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChunksMode {
    Single,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TunedMode {
    Entire,
    Single,
    Fixed,
}

/// Flags shared by both subcommands.
#[derive(Debug, Clone, Args)]
pub struct TuningArgs {
    #[arg(long, value_enum, default_value_t = OptimizerKind::Csa)]
    pub optimizer: OptimizerKind,
    /// Warm-up executions discarded per candidate.
    #[arg(long, default_value_t = 0)]
    pub ignore: usize,
    /// Number of coupled annealers (CSA).
    #[arg(long, default_value_t = 4)]
    pub num_opt: usize,
    /// CSA iterations, or Nelder-Mead evaluations (0 = unlimited).
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    /// Nelder-Mead stopping tolerance on the vertex cost spread.
    #[arg(long, default_value_t = 1e-6)]
    pub nm_error: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Ignore --seed and draw one from the OS.
    #[arg(long)]
    pub entropy_seed: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub output: OutputFormat,
    /// Trace destination; standard output when omitted.
    #[arg(long)]
    pub output_path: Option<PathBuf>,
}

impl TuningArgs {
    fn seed(&self) -> u64 {
        if self.entropy_seed {
            rand::random()
        } else {
            self.seed
        }
    }

    fn optimizer(&self, dim: usize, seed: u64) -> Result<Box<dyn NumericalOptimizer>, Error> {
        Ok(match self.optimizer {
            OptimizerKind::Csa => Box::new(Csa::new(dim, self.num_opt, self.max_iter, seed)?),
            OptimizerKind::Nm => {
                Box::new(NelderMead::new(dim, self.nm_error, self.max_iter, seed)?)
            }
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long, value_enum, default_value_t = Function::Sphere)]
    pub function: Function,
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    pub lower: f64,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    pub upper: f64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RbgsArgs {
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Smallest chunk size considered.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub lower: f64,
    /// Largest chunk size considered; defaults to `n`.
    #[arg(long, allow_hyphen_values = true)]
    pub upper: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub threads: usize,
    /// Interior grid size per side.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Convergence threshold on the mean absolute update per cell.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_sweeps: usize,
    #[arg(long, value_enum, default_value_t = ChunksMode::Single)]
    pub chunks_mode: ChunksMode,
    #[arg(long, value_enum, default_value_t = TunedMode::Entire)]
    pub tuned_mode: TunedMode,
    /// Chunk size for `--tuned-mode fixed`.
    #[arg(long)]
    pub fixed_chunk: Option<usize>,
}

/// Failure of a subcommand, mapped onto an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) | CliError::Runtime(_) => EXIT_FAILURE,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Dimension { .. } | Error::OutOfDomain { .. } => {
                CliError::Usage(e.to_string())
            }
            Error::Usage(_) | Error::Contract(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Bench(args) => run_bench(&args),
        Command::Rbgs(args) => run_rbgs(&args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

type SharedTrace = Arc<Mutex<Vec<TraceRecord>>>;

fn collecting_trace(session: TuningSession) -> (TuningSession, SharedTrace) {
    let trace: SharedTrace = Arc::default();
    let sink = trace.clone();
    let session =
        session.with_trace(move |r| sink.lock().expect("trace lock poisoned").push(r.clone()));
    (session, trace)
}

pub fn run_bench(args: &BenchArgs) -> Result<(), CliError> {
    let seed = args.tuning.seed();
    let optimizer = args.tuning.optimizer(args.dim, seed)?;
    let session = TuningSession::with_optimizer_kind(
        args.lower,
        args.upper,
        args.tuning.ignore,
        optimizer,
        PointKind::Real,
    )?;
    let (mut session, trace) = collecting_trace(session);

    let mut point = vec![0.0f64; args.dim];
    session.exec(&mut point, f64::NAN)?;
    while !session.is_finished() {
        let cost = args.function.eval(&point);
        session.exec(&mut point, cost)?;
    }

    let records = std::mem::take(&mut *trace.lock().expect("trace lock poisoned"));
    write_trace_to(&args.tuning, &records, args.dim)?;

    let summary = json!({
        "command": "bench",
        "optimizer": format!("{:?}", args.tuning.optimizer).to_lowercase(),
        "function": format!("{:?}", args.function).to_lowercase(),
        "seed": seed,
        "final_point": point,
        "final_cost": args.function.eval(&point),
        "evals": session.costs_fed(),
        "target_execs": session.target_execs(),
    });
    emit_summary(&args.tuning, &summary)
}

pub fn run_rbgs(args: &RbgsArgs) -> Result<(), CliError> {
    let seed = args.tuning.seed();
    let sweeper = Sweeper::new(args.threads)?;
    let n = args.n;
    let mut grid = Grid::with_boundary(n, 0.0, |i, _| if i == 0 { 1.0 } else { 0.0 })?;
    let dim = match args.chunks_mode {
        ChunksMode::Single => 1,
        ChunksMode::Dual => 2,
    };

    let mut records = Vec::new();
    let report;
    if args.tuned_mode == TunedMode::Fixed {
        let chunk = args
            .fixed_chunk
            .ok_or_else(|| CliError::Usage("--tuned-mode fixed requires --fixed-chunk".into()))?;
        if chunk == 0 || chunk > n {
            return Err(CliError::Usage(format!(
                "--fixed-chunk must lie in [1, {n}], got {chunk}"
            )));
        }
        let started = Instant::now();
        let stats = sweeper.solve(
            &mut grid,
            ChunkConfig::single(chunk),
            args.tol,
            args.max_sweeps,
        )?;
        let elapsed = started.elapsed().as_secs_f64();
        report = json!({
            "command": "rbgs",
            "tuned_mode": "fixed",
            "chunks": vec![chunk; dim],
            "sweeps": stats.sweeps,
            "converged": stats.converged,
            "final_diff": stats.diff,
            "main_loop_seconds": elapsed,
            "target_execs": 0,
            "tuning_sweeps": 0,
        });
    } else {
        let params = TuningParams {
            lower: args.lower,
            upper: args.upper.unwrap_or(n as f64),
            ignore: args.tuning.ignore,
            optimizer: match args.tuning.optimizer {
                OptimizerKind::Csa => OptimizerChoice::Csa {
                    num_opt: args.tuning.num_opt,
                    max_iter: args.tuning.max_iter,
                },
                OptimizerKind::Nm => OptimizerChoice::NelderMead {
                    error: args.tuning.nm_error,
                    max_iter: args.tuning.max_iter,
                },
            },
            seed,
            dual: dim == 2,
        };
        let (mut session, trace) = collecting_trace(params.session()?);
        let started = Instant::now();
        let out = match args.tuned_mode {
            TunedMode::Entire => rbgs::solve_tuned_entire(
                &sweeper,
                &mut grid,
                &mut session,
                args.tol,
                args.max_sweeps,
            )?,
            _ => rbgs::solve_tuned_single(
                &sweeper,
                &mut grid,
                &mut session,
                args.tol,
                args.max_sweeps,
            )?,
        };
        let elapsed = started.elapsed().as_secs_f64();
        records = std::mem::take(&mut *trace.lock().expect("trace lock poisoned"));
        let chunks = if dim == 1 {
            vec![out.chunks.black]
        } else {
            vec![out.chunks.black, out.chunks.red]
        };
        report = json!({
            "command": "rbgs",
            "tuned_mode": format!("{:?}", args.tuned_mode).to_lowercase(),
            "optimizer": format!("{:?}", args.tuning.optimizer).to_lowercase(),
            "seed": seed,
            "chunks": chunks,
            "sweeps": out.stats.sweeps,
            "converged": out.stats.converged,
            "final_diff": out.stats.diff,
            "wall_seconds": elapsed,
            "target_execs": out.target_execs,
            "tuning_sweeps": out.tuning_sweeps,
            "tuning_finished": out.tuning_finished,
            "clamp_warnings": sweeper.clamp_warnings(),
        });
    }
    write_trace_to(&args.tuning, &records, dim)?;
    emit_summary(&args.tuning, &report)
}

fn write_trace_to(args: &TuningArgs, records: &[TraceRecord], dim: usize) -> Result<(), CliError> {
    match &args.output_path {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_trace(&mut w, args.output, records, dim)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write_trace(&mut w, args.output, records, dim)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn emit_summary(args: &TuningArgs, summary: &Value) -> Result<(), CliError> {
    let line = serde_json::to_string(summary).map_err(|e| CliError::Runtime(e.to_string()))?;
    if args.output_path.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
    Ok(())
}

/// Column names of a trace with `dim` point coordinates.
pub fn trace_header(dim: usize) -> Vec<String> {
    let mut h = vec!["eval_index".to_string()];
    h.extend((0..dim).map(|d| format!("point_{d}")));
    h.push("cost".into());
    h.push("best_cost".into());
    h
}

/// Writes `records` as CSV (with header) or JSON lines.
pub fn write_trace<W: Write>(
    out: &mut W,
    format: OutputFormat,
    records: &[TraceRecord],
    dim: usize,
) -> Result<(), CliError> {
    let header = trace_header(dim);
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&header)?;
            for r in records {
                let mut row = vec![r.eval_index.to_string()];
                row.extend(r.point.iter().map(|v| v.to_string()));
                row.push(r.cost.to_string());
                row.push(r.best_cost.to_string());
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            for r in records {
                let mut obj = Map::new();
                obj.insert(header[0].clone(), json!(r.eval_index));
                for (key, v) in header[1..=dim].iter().zip(&r.point) {
                    obj.insert(key.clone(), json!(v));
                }
                obj.insert("cost".into(), json!(r.cost));
                obj.insert("best_cost".into(), json!(r.best_cost));
                serde_json::to_writer(&mut *out, &Value::Object(obj))
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}
