//! Command-line front end: `simulate`, `solve`, `sweep` and `report`.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::Error;
use crate::formats::{self, fmt_f64, Table};
use crate::integrator::{self, IntegratorConfig, VelocityInit};
use crate::lyapunov::{self, EnergyParams, RateFit, MONOTONE_TOL};
use crate::problems::{self, CompositeProblem, Family, Params, ProblemSpec};
use crate::solver::{self, SolverConfig, StepSize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTEGRATION: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

pub const SUMMARY_CSV_HEADER: &str = "alpha,fit_exponent,residual,sup_t2gap";

#[derive(Debug, Parser)]
#[command(name = "inertia-lab", version, about = "Inertial dynamics with vanishing damping: simulate, solve, sweep, report")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate ẍ + (α/t)ẋ + ∇f(x) = 0 and evaluate its energies.
    Simulate(SimulateArgs),
    /// Run the inertial forward-backward iteration.
    Solve(SolveArgs),
    /// Run simulate or solve over a grid of α values.
    Sweep(SweepArgs),
    /// Recompute a rate fit and monotonicity verdicts from a stored CSV.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProblemArgs {
    /// Catalog family name or path to a problem-spec JSON file.
    #[arg(long)]
    pub problem: String,
    /// Family parameter override, `key=value` (repeatable).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Seed for generated instances.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Starting point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DynamicsArgs {
    #[arg(long, default_value_t = 1.0)]
    pub t0: f64,
    #[arg(long, default_value_t = 100.0)]
    pub t_end: f64,
    /// `zero`, `gradient`, `prox-dir` or a comma-separated vector.
    #[arg(long, default_value = "zero", allow_hyphen_values = true)]
    pub v0: String,
    /// Speed for `gradient`/`prox-dir` (default (α−1)/t0).
    #[arg(long)]
    pub v0_scale: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub abs_tol: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 20_000_000)]
    pub max_steps: usize,
    /// λ of the anchored energy (default α−1).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// ξ of the anchored energy.
    #[arg(long, default_value_t = 0.0)]
    pub xi: f64,
    /// Exponent p of the time-weighted energy `t^p E_{λ,0}`.
    #[arg(long, default_value_t = 0.0)]
    pub p: f64,
    /// Trailing fraction of the log range used by the rate fit.
    #[arg(long, default_value_t = lyapunov::DEFAULT_FIT_WINDOW)]
    pub fit_window: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveOptions {
    /// `auto` (1/L) or a positive step.
    #[arg(long, default_value = "auto")]
    pub gamma: String,
    /// Previous iterate `x_{−1}` (defaults to x0).
    #[arg(long, allow_hyphen_values = true)]
    pub x_prev: Option<String>,
    #[arg(long)]
    pub stop_gap: Option<f64>,
    #[arg(long)]
    pub stop_step: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long)]
    pub iters: u64,
    #[command(flatten)]
    pub solve: SolveOptions,
    #[arg(long, default_value_t = lyapunov::DEFAULT_FIT_WINDOW)]
    pub fit_window: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    Simulate,
    Solve,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// `lo:hi:step` or a single value.
    #[arg(long)]
    pub alpha: String,
    #[arg(long, value_enum, default_value = "simulate")]
    pub mode: SweepMode,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
    #[arg(long, default_value_t = 10_000)]
    pub iters: u64,
    #[command(flatten)]
    pub solve: SolveOptions,
    /// Worker threads (default: logical cores).
    #[arg(long, env = "INERTIA_LAB_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = lyapunov::DEFAULT_FIT_WINDOW)]
    pub fit_window: f64,
    /// Fit the running upper envelope instead of the raw series.
    #[arg(long)]
    pub envelope: bool,
    /// Abscissa column (default `t`, else `k`).
    #[arg(long)]
    pub x: Option<String>,
    /// Ordinate column.
    #[arg(long, default_value = "gap")]
    pub y: String,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Diverged { .. } => EXIT_DIVERGED,
            Error::MaxStepsExceeded { .. } | Error::StepSizeUnderflow { .. } | Error::NonFiniteState { .. } => {
                EXIT_INTEGRATION
            }
            _ => EXIT_USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: EXIT_IO, message: e.to_string() }
    }
}

impl From<formats::ParseError> for Failure {
    fn from(e: formats::ParseError) -> Self {
        Self::usage(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let outcome = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &argv),
        Command::Solve(a) => cmd_solve(a, &argv),
        Command::Sweep(a) => cmd_sweep(a, &argv),
        Command::Report(a) => cmd_report(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn run_from_env() -> i32 {
    run_with_args(std::env::args_os())
}

fn parse_param(kv: &str) -> CliResult<(String, f64)> {
    let (k, v) = kv
        .split_once('=')
        .ok_or_else(|| Failure::usage(format!("--param expects key=value, got `{kv}`")))?;
    Ok((k.trim().to_string(), formats::parse_real(v)?))
}

/// Resolve `--problem` as a spec file when such a file exists, else as a family name.
pub fn load_problem(args: &ProblemArgs) -> CliResult<CompositeProblem> {
    let path = Path::new(&args.problem);
    let (family, mut params): (String, Params) = if path.is_file() {
        let text = fs::read_to_string(path)?;
        let spec = ProblemSpec::parse(&text)?;
        let params = spec.merged_params();
        (spec.family, params)
    } else {
        (args.problem.clone(), Params::new())
    };
    for kv in &args.params {
        let (k, v) = parse_param(kv)?;
        params.insert(k, v);
    }
    let fam: Family = family.parse()?;
    if let Some(seed) = args.seed {
        if fam.allowed_params().contains(&"seed") {
            params.insert("seed".into(), seed as f64);
        }
    }
    Ok(problems::catalog(&family, &params)?)
}

fn start_point(args: &ProblemArgs, problem: &CompositeProblem) -> CliResult<Vec<f64>> {
    let x0 = match &args.x0 {
        Some(s) => formats::parse_vector(s)?,
        None => problem.default_start(),
    };
    problem.check_dim(&x0)?;
    Ok(x0)
}

fn velocity_init(d: &DynamicsArgs, problem: &CompositeProblem) -> CliResult<VelocityInit> {
    Ok(match d.v0.as_str() {
        "zero" => VelocityInit::Zero,
        "gradient" => VelocityInit::Gradient { scale: d.v0_scale },
        "prox-dir" => {
            let gamma = match problem.smooth.lipschitz() {
                Some(l) if l > 0.0 => 1.0 / l,
                _ => 1.0,
            };
            VelocityInit::ProxDir { gamma, scale: d.v0_scale }
        }
        other => VelocityInit::Explicit(formats::parse_vector(other)?),
    })
}

fn create(dir: &Path, name: &str) -> CliResult<(BufWriter<File>, PathBuf)> {
    let path = dir.join(name);
    Ok((BufWriter::new(File::create(&path)?), path))
}

fn write_rate_fit(dir: &Path, fit: &Result<RateFit, Error>) -> CliResult<PathBuf> {
    let (mut w, path) = create(dir, "rate_fit.json")?;
    let value = match fit {
        Ok(f) => serde_json::to_value(f).expect("rate fit serializes"),
        Err(e) => json!({ "error": e.to_string() }),
    };
    serde_json::to_writer_pretty(&mut w, &value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(path)
}

#[derive(Debug, Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    problem: &'a str,
    problem_id: &'a str,
    config: &'a C,
    outputs: Vec<String>,
    tool_version: &'a str,
    wall_time_seconds: f64,
    argv: &'a [String],
}

#[allow(clippy::too_many_arguments)]
fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &str,
    problem: &ProblemArgs,
    problem_id: &str,
    config: &C,
    outputs: &[PathBuf],
    started: Instant,
    argv: &[String],
) -> CliResult<()> {
    let manifest = Manifest {
        command,
        problem: &problem.problem,
        problem_id,
        config,
        outputs: outputs
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
        tool_version: env!("CARGO_PKG_VERSION"),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        argv,
    };
    let (mut w, _) = create(dir, "manifest.json")?;
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// What a sweep cell contributes to the summary.
#[derive(Debug, Clone, Copy)]
pub struct CellSummary {
    pub fit: Option<RateFit>,
    pub sup_t2gap: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SimulateEcho<'a> {
    alpha: f64,
    integrator: &'a IntegratorConfig,
    x0: &'a [f64],
    v0: &'a [f64],
    energy: Option<&'a EnergyParams>,
    dynamics: &'a DynamicsArgs,
    params: &'a [String],
    seed: Option<u64>,
}

fn simulate_into(
    problem: &CompositeProblem,
    args: &ProblemArgs,
    d: &DynamicsArgs,
    alpha: f64,
    dir: &Path,
    argv: &[String],
    quiet: bool,
) -> CliResult<CellSummary> {
    let started = Instant::now();
    if !problem.is_smooth() {
        return Err(Error::NonsmoothDynamics(problem.id.clone()).into());
    }
    let mut config = IntegratorConfig::new(alpha, d.t0, d.t_end);
    config.rel_tol = d.rel_tol;
    config.abs_tol = d.abs_tol;
    config.sample_count = d.samples;
    config.max_steps = d.max_steps;
    config.validate()?;
    let x0 = start_point(args, problem)?;
    let v0 = integrator::initial_velocity(problem, &x0, alpha, d.t0, &velocity_init(d, problem)?)?;
    let traj = integrator::integrate(problem, &config, &x0, &v0)?;

    let energy = match &problem.known_minimizer {
        Some(xstar) => Some(EnergyParams::new(d.lambda.unwrap_or((alpha - 1.0).max(0.0)), d.xi, d.p, xstar.clone())?),
        None => None,
    };
    let report = lyapunov::energy_report(&traj, problem, energy.as_ref())?;
    let gaps = report.gap_series();
    let fit = if gaps.is_empty() {
        Err(Error::NoReferenceMinimum(problem.id.clone()))
    } else {
        lyapunov::fit_rate(&gaps, d.fit_window, true)
    };
    let sup_t2gap = report.samples.iter().filter_map(|s| s.tsq_gap).reduce(f64::max);

    fs::create_dir_all(dir)?;
    let (mut w, traj_path) = create(dir, "trajectory.csv")?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    let (mut w, energy_path) = create(dir, "energy.csv")?;
    report.write_csv(&mut w)?;
    w.flush()?;
    let fit_path = write_rate_fit(dir, &fit)?;
    let echo = SimulateEcho {
        alpha,
        integrator: &config,
        x0: &x0,
        v0: &v0,
        energy: energy.as_ref(),
        dynamics: d,
        params: &args.params,
        seed: args.seed,
    };
    write_manifest(
        dir,
        "simulate",
        args,
        &problem.id,
        &echo,
        &[traj_path, energy_path, fit_path],
        started,
        argv,
    )?;

    if !quiet {
        println!("problem {}  α = {alpha}  t ∈ [{}, {}]", problem.id, d.t0, d.t_end);
        println!(
            "steps: {} accepted, {} rejected, {} gradient evaluations",
            traj.stats.accepted, traj.stats.rejected, traj.stats.rhs_evals
        );
        for (name, v) in &report.verdicts {
            let status = if v.nonincreasing { "nonincreasing" } else { "increases" };
            let note = if v.asserted { "" } else { " (not guaranteed)" };
            println!("{name}: {status}, max relative rise {:.3e}{note}", v.max_violation);
        }
        if let Some(r) = report.integrals.get("energy_balance_residual") {
            println!("energy balance residual: {r:.3e}");
        }
        match &fit {
            Ok(f) => println!("gap envelope rate: t^{:.4} (residual {:.3e})", f.exponent, f.residual),
            Err(e) => println!("gap rate: {e}"),
        }
        if alpha < 3.0 {
            println!("α<3: no guarantee");
        }
    }
    Ok(CellSummary { fit: fit.ok(), sup_t2gap })
}

pub fn cmd_simulate(a: &SimulateArgs, argv: &[String]) -> CliResult<()> {
    let problem = load_problem(&a.problem)?;
    simulate_into(&problem, &a.problem, &a.dynamics, a.alpha, &a.problem.out, argv, false).map(|_| ())
}

fn parse_gamma(s: &str) -> CliResult<StepSize> {
    if s == "auto" {
        Ok(StepSize::Auto)
    } else {
        Ok(StepSize::Fixed(formats::parse_real(s)?))
    }
}

#[derive(Debug, Serialize)]
struct SolveEcho<'a> {
    solver: &'a SolverConfig,
    gamma_used: f64,
    params: &'a [String],
    seed: Option<u64>,
    fit_window: f64,
}

#[allow(clippy::too_many_arguments)]
fn solve_into(
    problem: &CompositeProblem,
    args: &ProblemArgs,
    opts: &SolveOptions,
    alpha: f64,
    iters: u64,
    fit_window: f64,
    dir: &Path,
    argv: &[String],
    quiet: bool,
) -> CliResult<CellSummary> {
    let started = Instant::now();
    let mut config = SolverConfig::new(alpha, iters, start_point(args, problem)?);
    config.gamma = parse_gamma(&opts.gamma)?;
    config.x_prev = opts.x_prev.as_deref().map(formats::parse_vector).transpose()?;
    config.stop_gap = opts.stop_gap;
    config.stop_step = opts.stop_step;
    let history = solver::run(problem, &config)?;
    let diag = solver::discrete_diagnostics(&history);
    let gaps = history.gap_series();
    let fit = if gaps.is_empty() {
        Err(Error::NoReferenceMinimum(problem.id.clone()))
    } else {
        lyapunov::fit_rate(&gaps, fit_window, true)
    };

    fs::create_dir_all(dir)?;
    let (mut w, hist_path) = create(dir, "history.csv")?;
    history.write_csv(&mut w)?;
    w.flush()?;
    let (mut w, diag_path) = create(dir, "diagnostics.csv")?;
    diag.write_csv(&mut w)?;
    w.flush()?;
    let fit_path = write_rate_fit(dir, &fit)?;
    let echo = SolveEcho {
        solver: &config,
        gamma_used: history.gamma,
        params: &args.params,
        seed: args.seed,
        fit_window,
    };
    write_manifest(dir, "solve", args, &problem.id, &echo, &[hist_path, diag_path, fit_path], started, argv)?;

    if !quiet {
        println!("problem {}  α = {alpha}  γ = {}  iterations {}", problem.id, history.gamma, history.iterations);
        let last = history.last();
        println!("F = {}  gap = {}", fmt_f64(last.value), formats::fmt_opt(last.gap));
        if let Some(g) = diag.envelope_growth {
            println!("k²·gap envelope growth over the last decade: {:.3e}", g);
        }
        println!("max k·‖Δx‖: {:.3e}", diag.max_k_step);
        if let Some(c) = diag.step2_cauchy {
            println!("Σk‖Δx‖² tail-Cauchy: {c} (last-half fraction {:.3e})", diag.step2_tail_fraction);
        }
        match &fit {
            Ok(f) => println!("gap envelope rate: k^{:.4} (residual {:.3e})", f.exponent, f.residual),
            Err(e) => println!("gap rate: {e}"),
        }
        for w in &history.warnings {
            println!("warning: {w}");
        }
    }
    let sup_t2gap = diag.k2gap.as_ref().and_then(|v| v.iter().copied().reduce(f64::max));
    Ok(CellSummary { fit: fit.ok(), sup_t2gap })
}

pub fn cmd_solve(a: &SolveArgs, argv: &[String]) -> CliResult<()> {
    let problem = load_problem(&a.problem)?;
    solve_into(&problem, &a.problem, &a.solve, a.alpha, a.iters, a.fit_window, &a.problem.out, argv, false)
        .map(|_| ())
}

/// Directory name of a sweep cell.
pub fn cell_dir_name(alpha: f64) -> String {
    format!("alpha_{alpha}")
}

pub fn cmd_sweep(a: &SweepArgs, argv: &[String]) -> CliResult<()> {
    let alphas = formats::parse_alpha_range(&a.alpha)?;
    let problem = load_problem(&a.problem)?;
    fs::create_dir_all(&a.problem.out)?;
    let jobs = match a.jobs {
        Some(0) => return Err(Failure::usage("--jobs must be positive")),
        Some(n) => n,
        None => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure { code: EXIT_IO, message: e.to_string() })?;
    let results: Vec<CliResult<CellSummary>> = pool.install(|| {
        alphas
            .par_iter()
            .map(|&alpha| {
                let dir = a.problem.out.join(cell_dir_name(alpha));
                match a.mode {
                    SweepMode::Simulate => simulate_into(&problem, &a.problem, &a.dynamics, alpha, &dir, argv, true),
                    SweepMode::Solve => solve_into(
                        &problem,
                        &a.problem,
                        &a.solve,
                        alpha,
                        a.iters,
                        a.dynamics.fit_window,
                        &dir,
                        argv,
                        true,
                    ),
                }
            })
            .collect()
    });

    let (mut w, _) = create(&a.problem.out, "summary.csv")?;
    writeln!(w, "{SUMMARY_CSV_HEADER}")?;
    let mut succeeded = 0;
    for (alpha, r) in alphas.iter().zip(&results) {
        match r {
            Ok(cell) => {
                succeeded += 1;
                writeln!(
                    w,
                    "{},{},{},{}",
                    fmt_f64(*alpha),
                    formats::fmt_opt(cell.fit.map(|f| f.exponent)),
                    formats::fmt_opt(cell.fit.map(|f| f.residual)),
                    formats::fmt_opt(cell.sup_t2gap)
                )?;
                println!("α = {alpha}: ok");
            }
            Err(f) => {
                writeln!(w, "{},failed,,", fmt_f64(*alpha))?;
                println!("α = {alpha}: failed ({})", f.message);
            }
        }
    }
    w.flush()?;
    if succeeded == 0 {
        let first = results.into_iter().find_map(Result::err).expect("at least one cell");
        return Err(Failure {
            code: first.code,
            message: format!("every sweep cell failed; first error: {}", first.message),
        });
    }
    Ok(())
}

/// Columns whose monotonicity the report checks when present.
const MONOTONE_COLUMNS: [&str; 4] = ["W", "E_lx", "E_lp", "discrete_energy"];

#[derive(Debug, Serialize)]
pub struct Report {
    pub x: String,
    pub y: String,
    pub fit: RateFit,
    pub verdicts: std::collections::BTreeMap<String, lyapunov::MonotoneVerdict>,
}

/// Rate fit and monotonicity verdicts from a parsed table.
pub fn report_table(table: &Table, args: &ReportArgs) -> CliResult<Report> {
    let x = match &args.x {
        Some(x) => x.clone(),
        None if table.column_index("t").is_some() => "t".into(),
        None => "k".into(),
    };
    let xi = table
        .column_index(&x)
        .ok_or_else(|| Failure::usage(format!("column `{x}` not found")))?;
    let yi = table
        .column_index(&args.y)
        .ok_or_else(|| Failure::usage(format!("column `{}` not found", args.y)))?;
    let fit = lyapunov::fit_rate(&table.pairs(xi, yi), args.fit_window, args.envelope)?;
    let mut verdicts = std::collections::BTreeMap::new();
    for name in MONOTONE_COLUMNS {
        if let Some(i) = table.column_index(name) {
            let values: Vec<f64> = table.column(i).into_iter().flatten().collect();
            if !values.is_empty() {
                verdicts.insert(name.to_string(), lyapunov::monotone_verdict(&values, MONOTONE_TOL, false));
            }
        }
    }
    Ok(Report { x, y: args.y.clone(), fit, verdicts })
}

pub fn cmd_report(a: &ReportArgs) -> CliResult<()> {
    let text = fs::read_to_string(&a.input)?;
    let table = formats::parse_table(&text)
        .map_err(|e| Failure::usage(format!("{}: {e}", a.input.display())))?;
    let report = report_table(&table, a)?;
    let f = &report.fit;
    println!(
        "{} ~ {}^{:.6} over [{}, {}] (residual {:.3e}, {})",
        report.y,
        report.x,
        f.exponent,
        f.window.0,
        f.window.1,
        f.residual,
        if f.envelope { "envelope" } else { "raw" }
    );
    for (name, v) in &report.verdicts {
        println!(
            "{name}: {} (max relative rise {:.3e})",
            if v.nonincreasing { "nonincreasing" } else { "increases" },
            v.max_violation
        );
    }
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_subcommands() {
        let cli = Cli::try_parse_from(["inertia-lab", "simulate", "--problem", "quadratic", "--alpha", "3", "--x0", "-1,2"]).unwrap();
        let Command::Simulate(a) = cli.command else { panic!() };
        assert_eq!(a.alpha, 3.0);
        assert_eq!(a.dynamics.t0, 1.0);
        assert_eq!(a.problem.x0.as_deref(), Some("-1,2"));
        assert!(Cli::try_parse_from(["inertia-lab", "solve", "--problem", "lasso", "--alpha", "3"]).is_err());
        let cli = Cli::try_parse_from(["inertia-lab", "sweep", "--problem", "quadratic", "--alpha", "3:6:1", "--jobs", "2"]).unwrap();
        let Command::Sweep(a) = cli.command else { panic!() };
        assert_eq!(a.jobs, Some(2));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Failure::from(Error::Diverged { k: 1, last_finite: vec![] }).code, EXIT_DIVERGED);
        assert_eq!(Failure::from(Error::UnknownFamily("x".into())).code, EXIT_USAGE);
        assert_eq!(run_with_args(["inertia-lab", "simulate", "--alpha", "3"]), EXIT_USAGE);
        assert_eq!(run_with_args(["inertia-lab", "simulate", "--problem", "nope", "--alpha", "3"]), EXIT_USAGE);
    }

    #[test]
    fn params_and_seed() {
        assert_eq!(parse_param("mu=2e-1").unwrap(), ("mu".to_string(), 0.2));
        assert!(parse_param("mu").is_err());
        let args = ProblemArgs {
            problem: "quadratic".into(),
            params: vec!["dim=3".into()],
            seed: Some(4),
            x0: None,
            out: "out".into(),
        };
        assert_eq!(load_problem(&args).unwrap().dim(), 3);
    }
}
