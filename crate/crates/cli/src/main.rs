//! `rtc`: real-time coding distortion solver.
//!
//! Exit codes: 0 success, 1 numerical non-convergence (report or rows flagged),
//! 2 usage, validation or capacity errors.

mod problem;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use problem::{parse_assignment, parse_memory, parse_range, read_json, ProblemArgs};
use rtc_core::bounds::{channel_capacity, shannon_limit, symbol_by_symbol_check, uncoded_condition_check, RegionOptions};
use rtc_core::coding::report::{ScenarioSolveReport, FLAG_NONCONVERGED};
use rtc_core::coding::{
    simplex_grid, solve_feedback_complete, solve_feedback_finite, solve_nofeedback, solve_vending_feedback,
    solve_vending_nofeedback, CompleteOptions, MemorySpec, SolveOptions, VendingMemories, VendingMode,
};
use rtc_core::experiment::{fmt_sig, run_region, run_sweep, to_csv, ExperimentRecord, Quantity, SweepConfig};
use rtc_core::models::ProblemSpec;
use rtc_core::par::with_workers;
use rtc_core::sim::{simulate, PolicyBundle, SimReport};
use rtc_core::Limits;

#[derive(Debug, Parser)]
#[command(name = "rtc", version, about = "Minimum distortion of real-time source-channel coding with lookahead")]
struct Cli {
    /// Worker threads for sweeps and table enumeration (default: all processors).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one scenario and print its report as JSON.
    Solve(SolveArgs),
    /// Tabulate D0, Dinf, D(d, m) and related quantities over a (p, delta) grid as CSV.
    Sweep(SweepArgs),
    /// Scan where finite-memory lookahead coding beats symbol-by-symbol coding.
    Region(RegionArgs),
    /// Check whether the symbol-by-symbol policy satisfies the optimality equation on a belief grid.
    CheckS2s(CheckArgs),
    /// Separation limit D(inf), where rate-distortion meets capacity.
    Shannon(ProblemArgs),
    /// Monte Carlo estimate of the distortion of a solved policy.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Also write the policy bundle (input to `simulate --bundle`).
    #[arg(long)]
    bundle_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Encoder lookahead.
    #[arg(long, default_value_t = 0)]
    d: usize,
    /// Decoder memory: `last:<m>` or a JSON memory file.
    #[arg(long, default_value = "last:0")]
    memory: String,
    /// Side-information memory of a vending decoder.
    #[arg(long, default_value = "last:0")]
    side_memory: String,
    /// No feedback to the encoder; the encoder tracks a belief over decoder memory.
    #[arg(long, conflicts_with = "complete")]
    no_feedback: bool,
    /// Feedback with complete decoder memory (belief over lookahead tuples).
    #[arg(long)]
    complete: bool,
    /// Belief grid resolution for --no-feedback and --complete.
    #[arg(long, default_value_t = 10)]
    grid: usize,
    /// Skip the doubled-resolution stability solve of --complete.
    #[arg(long)]
    no_stability: bool,
    /// Vending budget; defaults to the budget in the vending description.
    #[arg(long, conflicts_with_all = ["unconstrained", "zero_cost_only"])]
    budget: Option<f64>,
    /// Ignore the vending budget.
    #[arg(long, conflicts_with = "zero_cost_only")]
    unconstrained: bool,
    /// Allow only zero-cost vending actions.
    #[arg(long)]
    zero_cost_only: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Fixed parameter, `p=<v>` or `delta=<v>`.
    #[arg(long)]
    fix: Vec<String>,
    /// Varied parameter, `p=lo:hi:step` or `delta=lo:hi:step`.
    #[arg(long)]
    vary: Vec<String>,
    /// Comma-separated subset of D0, Dinf, Ddm, region_flag, s2s_check.
    #[arg(long, value_delimiter = ',', default_value = "D0,Dinf,Ddm")]
    quantities: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    d: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    m: Vec<usize>,
    /// Margin of region_flag.
    #[arg(long, default_value_t = 1e-6)]
    margin: f64,
    /// Belief grid resolution of s2s_check.
    #[arg(long, default_value_t = 10)]
    grid: usize,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RegionArgs {
    #[arg(long, default_value = "0:0.5:0.025")]
    p: String,
    #[arg(long, default_value = "0:0.5:0.025")]
    delta: String,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 1e-6)]
    margin: f64,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the summary JSON here instead of standard error.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Belief grid resolution.
    #[arg(long, default_value_t = 10)]
    grid: usize,
    /// Check the uncoded map instead of the best symbol map.
    #[arg(long)]
    uncoded: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Simulate this policy bundle instead of solving first.
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    horizon: u64,
    #[arg(long, default_value_t = 10)]
    replications: usize,
    #[arg(long)]
    seed: u64,
}

#[derive(Serialize)]
struct ShannonOutput {
    value: f64,
    capacity_nats: f64,
}

#[derive(Serialize)]
struct SimulateOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    solved_distortion: Option<f64>,
    simulation: SimReport,
}

/// Outcome of a command: either clean or with flagged non-convergence.
enum Status {
    Ok,
    Nonconverged,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli.workers;
    let result = with_workers(workers, move || run(cli.command)).map_err(anyhow::Error::from).and_then(|r| r);
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Nonconverged) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let nonconverged = e.downcast_ref::<rtc_core::Error>().is_some_and(rtc_core::Error::is_nonconvergence);
            ExitCode::from(if nonconverged { 1 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<Status> {
    let limits = Limits::from_env()?;
    let opts = SolveOptions { limits, ..SolveOptions::default() };
    match command {
        Command::Solve(args) => {
            let spec = args.problem.load()?;
            let (report, bundle) = solve(&spec, &args.scenario, &opts)?;
            if let Some(path) = &args.bundle_out {
                write_file(path, &to_json(&bundle)?)?;
            }
            emit(None, &to_json(&report)?)?;
            Ok(report_status(&report))
        }
        Command::Sweep(args) => sweep(&args, &opts),
        Command::Region(args) => {
            let mut region = RegionOptions::new(args.d, args.m);
            region.margin = args.margin;
            region.solve = opts;
            let (rows, summary, _) = run_region(&parse_range(&args.p)?, &parse_range(&args.delta)?, &region);
            emit(args.out.as_ref(), &to_csv(&rows))?;
            let json = to_json(&summary)?;
            match &args.summary {
                Some(path) => write_file(path, &json)?,
                None => eprint!("{json}"),
            }
            Ok(rows_status(&rows))
        }
        Command::CheckS2s(args) => {
            let spec = args.problem.load()?;
            let dim = spec
                .source_size()
                .checked_pow(args.d as u32 + 1)
                .context("lookahead tuple alphabet overflows")?;
            let grid = simplex_grid(dim, args.grid, &limits)?;
            let report = if args.uncoded {
                uncoded_condition_check(&spec, args.d, &grid, &limits)?
            } else {
                symbol_by_symbol_check(&spec, args.d, &grid, &limits)?
            };
            emit(None, &to_json(&report)?)?;
            Ok(Status::Ok)
        }
        Command::Shannon(problem) => {
            let spec = problem.load()?;
            let out = ShannonOutput { value: shannon_limit(&spec)?, capacity_nats: channel_capacity(&spec.channel)? };
            emit(None, &to_json(&out)?)?;
            Ok(Status::Ok)
        }
        Command::Simulate(args) => {
            let spec = args.problem.load()?;
            let (bundle, solved) = match &args.bundle {
                Some(path) => (read_json::<PolicyBundle>(path)?, None),
                None => {
                    let (report, bundle) = solve(&spec, &args.scenario, &opts)?;
                    (bundle, Some(report.distortion))
                }
            };
            let simulation =
                simulate(&bundle, &spec, args.scenario.d, args.horizon, args.replications, args.seed, &limits)?;
            emit(None, &to_json(&SimulateOutput { solved_distortion: solved, simulation })?)?;
            Ok(Status::Ok)
        }
    }
}

fn solve(spec: &ProblemSpec, args: &ScenarioArgs, opts: &SolveOptions) -> Result<(ScenarioSolveReport, PolicyBundle)> {
    let d = args.d;
    if spec.vending.is_some() {
        if args.complete {
            bail!("--complete is not available for vending problems");
        }
        let mode = if args.unconstrained {
            VendingMode::Unconstrained
        } else if args.zero_cost_only {
            VendingMode::ZeroCostOnly
        } else {
            VendingMode::Budget(args.budget.unwrap_or(spec.vending()?.costs.budget()))
        };
        let mems = VendingMemories {
            inputs: parse_memory(&args.memory, spec.input_size(), &opts.limits)?,
            side: parse_memory(&args.side_memory, spec.vending()?.side_outputs(), &opts.limits)?,
        };
        let report = if args.no_feedback {
            solve_vending_nofeedback(spec, d, &mems, args.grid, mode, opts)?
        } else {
            solve_vending_feedback(spec, d, &mems, mode, opts)?
        };
        let bundle = PolicyBundle::from_report(&report, mems.inputs, Some(mems.side));
        return Ok((report, bundle));
    }
    if args.budget.is_some() || args.unconstrained || args.zero_cost_only {
        bail!("vending options need a vending machine (--vending or a --spec with one)");
    }
    if args.complete {
        let complete = CompleteOptions { resolution: args.grid, stability: !args.no_stability };
        let report = solve_feedback_complete(spec, d, &complete, opts)?;
        let bundle = PolicyBundle::from_report(&report, MemorySpec::trivial(spec.output_size())?, None);
        return Ok((report, bundle));
    }
    let memory = parse_memory(&args.memory, spec.output_size(), &opts.limits)?;
    let report = if args.no_feedback {
        solve_nofeedback(spec, d, &memory, args.grid, opts)?
    } else {
        solve_feedback_finite(spec, d, &memory, opts)?
    };
    let bundle = PolicyBundle::from_report(&report, memory, None);
    Ok((report, bundle))
}

fn sweep(args: &SweepArgs, opts: &SolveOptions) -> Result<Status> {
    let quantities = args.quantities.iter().map(|q| q.trim().parse::<Quantity>()).collect::<Result<Vec<_>, _>>()?;
    let (mut p, mut delta) = (None, None);
    for raw in args.fix.iter().chain(&args.vary) {
        let (name, values) = parse_assignment(raw)?;
        let slot = if name == "p" { &mut p } else { &mut delta };
        if slot.replace(values).is_some() {
            bail!("{name} is set more than once");
        }
    }
    let (Some(p), Some(delta)) = (p, delta) else {
        bail!("sweep needs both p and delta, each from --fix or --vary");
    };
    let points = p.iter().flat_map(|&p| delta.iter().map(move |&dl| (p, dl))).collect();
    let mut cfg = SweepConfig::new(points, quantities, args.d.clone(), args.m.clone());
    cfg.margin = args.margin;
    cfg.grid_resolution = args.grid;
    cfg.solve = *opts;
    let rows = run_sweep(&cfg)?;
    emit(args.out.as_ref(), &to_csv(&rows))?;
    Ok(rows_status(&rows))
}

fn report_status(report: &ScenarioSolveReport) -> Status {
    if report.flags.iter().any(|f| f == FLAG_NONCONVERGED) {
        Status::Nonconverged
    } else {
        Status::Ok
    }
}

fn rows_status(rows: &[ExperimentRecord]) -> Status {
    if rows.iter().any(ExperimentRecord::is_nonconverged) {
        Status::Nonconverged
    } else {
        Status::Ok
    }
}

/// Pretty JSON with every float rounded to 12 significant digits.
fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut value = serde_json::to_value(value)?;
    round_floats(&mut value);
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

fn round_floats(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            if let Some(r) = fmt_sig(x).parse().ok().and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn write_file(path: &PathBuf, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(path) => write_file(path, text),
        None => Ok(io::stdout().lock().write_all(text.as_bytes())?),
    }
}
