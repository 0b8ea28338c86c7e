//! Command-line interface.
//!
//! Exit codes: 0 converged or completed, 1 usage or I/O error, 2 the solve
//! stopped without converging.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{
    gen_chessboard_boundary, gen_gaussian, make_consistent_system, make_ridge_problem,
    read_matrix_market, read_vector_market, run_experiment, summarize, write_matrix_market,
    write_matrix_market_to, BenchReport, ExperimentSpec, HistoryTable, InstanceMeta,
    InstanceSource, MethodSpec,
};
use crate::engine::{solve, LinearSystem, SolveConfig, SolveReport, StopRule, DEFAULT_MAX_ITERS};
use crate::matrix::Matrix;
use crate::ridge::{ridge_solve, NormMode, RidgeConfig, RidgeMethod};
use crate::selection::{SampleGate, SelectionStrategy, ZTestMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

const LINEAR_TOL: f64 = 1e-6;
const SPARSE_TOL: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "kaczmarz", version, about = "Kaczmarz-type solvers and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a consistent system A x = b.
    Solve(SolveArgs),
    /// Solve the ridge system (A Aᵀ + τI) x = b.
    Ridge(RidgeArgs),
    /// Run a method grid over several trials and report mean iteration counts.
    Bench(BenchArgs),
    /// Write a generated matrix in Matrix Market format.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodName {
    Cyclic,
    Rk,
    Grk,
    Rgrk,
    Powert,
    Prk,
    Prks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NormsArg {
    Exact,
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Known,
    Residual,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
struct SourceArgs {
    /// Matrix Market file.
    #[arg(long, group = "source")]
    matrix: Option<PathBuf>,
    /// Gaussian matrix of the given shape, e.g. 1000x200.
    #[arg(long, value_name = "MxN", value_parser = parse_shape, group = "source")]
    synth: Option<(usize, usize)>,
    /// Chessboard-complex boundary matrix, RxC or RxCxD (D defaults to 2).
    #[arg(long, value_name = "RxC[xD]", value_parser = parse_board, group = "source")]
    chessboard: Option<(usize, usize, usize)>,
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Use the transpose of the loaded matrix.
    #[arg(long, requires = "matrix")]
    transpose: bool,
    /// Seed for the synthetic matrix and the solver.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stopping tolerance [default: 1e-6 for synthetic systems, 1e-3 otherwise].
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Stopping rule.
    #[arg(long, value_enum, default_value_t = MetricArg::Known)]
    metric: MetricArg,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 600.0)]
    time_budget: f64,
    /// Convergence history CSV.
    #[arg(long, value_name = "PATH")]
    history: Option<PathBuf>,
    /// JSON report.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StrategyArgs {
    /// Relaxation parameter of rgrk.
    #[arg(long)]
    theta: Option<f64>,
    /// Exponent of powert.
    #[arg(long)]
    t: Option<u32>,
    /// Sampling ratio of prks.
    #[arg(long)]
    eta: Option<f64>,
    /// Critical Z value of prks; `inf` disables the gate.
    #[arg(long)]
    q: Option<f64>,
    /// Accept samples on |Z| < q instead of Z < q.
    #[arg(long)]
    two_sided: bool,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum)]
    method: MethodName,
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Right-hand side as a single-column Matrix Market file (default A·1).
    #[arg(long, value_name = "PATH")]
    rhs: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RidgeArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum)]
    method: MethodName,
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Regularization parameter, must be positive.
    #[arg(long, allow_negative_numbers = true)]
    tau: f64,
    #[arg(long, value_enum, default_value_t = NormsArg::Exact)]
    norms: NormsArg,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated method list.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    method: Vec<MethodName>,
    #[command(flatten)]
    strategy: StrategyArgs,
    #[arg(long, default_value_t = crate::bench::DEFAULT_TRIALS)]
    trials: usize,
    /// Benchmark the ridge methods with this regularization parameter.
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    #[arg(long, value_enum, requires = "tau")]
    norms: Option<NormsArg>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, short, value_name = "PATH")]
    output: Option<PathBuf>,
}

fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    let (m, n) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected MxN, got '{s}'"))?;
    let m: usize = m.parse().map_err(|_| format!("invalid row count '{m}'"))?;
    let n: usize = n.parse().map_err(|_| format!("invalid column count '{n}'"))?;
    if m == 0 || n == 0 {
        return Err("dimensions must be positive".into());
    }
    Ok((m, n))
}

fn parse_board(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let nums = parts
        .iter()
        .map(|p| p.parse::<usize>().map_err(|_| format!("invalid number '{p}'")))
        .collect::<Result<Vec<_>, _>>()?;
    let (r, c, d) = match nums.as_slice() {
        [r, c] => (*r, *c, 2),
        [r, c, d] => (*r, *c, *d),
        _ => return Err(format!("expected RxC or RxCxD, got '{s}'")),
    };
    if d + 1 > r.min(c) {
        return Err(format!("a {r}x{c} board holds no {}-rook placement", d + 1));
    }
    Ok((r, c, d))
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Ridge(a) => cmd_ridge(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Gen(a) => cmd_gen(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn load_source(source: &SourceArgs, transpose: bool, seed: u64) -> Result<InstanceSource> {
    Ok(match (&source.matrix, source.synth, source.chessboard) {
        (Some(path), _, _) => InstanceSource::MatrixMarketFile {
            path: path.clone(),
            transpose,
        },
        (_, Some((m, n)), _) => InstanceSource::GaussianSynthetic { m, n, seed },
        (_, _, Some((rows, cols, dim))) => InstanceSource::Chessboard { rows, cols, dim },
        _ => bail!("one of --matrix, --synth or --chessboard is required"),
    })
}

fn default_tol(common: &CommonArgs, ridge: bool) -> f64 {
    common.tol.unwrap_or(if ridge || common.source.synth.is_none() {
        SPARSE_TOL
    } else {
        LINEAR_TOL
    })
}

fn time_budget(common: &CommonArgs) -> Result<Duration> {
    Duration::try_from_secs_f64(common.time_budget)
        .map_err(|_| anyhow!("--time-budget must be a non-negative number of seconds"))
}

fn stop_rule(metric: MetricArg) -> StopRule {
    match metric {
        MetricArg::Known => StopRule::KnownSolutionError,
        MetricArg::Residual => StopRule::RelativeResidual,
    }
}

/// Checks that strategy flags only accompany the methods that use them.
fn check_strategy_flags(methods: &[MethodName], s: &StrategyArgs) -> Result<()> {
    let has = |m| methods.contains(&m);
    if s.theta.is_some() && !has(MethodName::Rgrk) {
        bail!("--theta is only valid with --method rgrk");
    }
    if s.t.is_some() && !has(MethodName::Powert) {
        bail!("--t is only valid with --method powert");
    }
    if (s.eta.is_some() || s.q.is_some() || s.two_sided) && !has(MethodName::Prks) {
        bail!("--eta, --q and --two-sided are only valid with --method prks");
    }
    if has(MethodName::Powert) && s.t.is_none() {
        bail!("--method powert requires --t");
    }
    if has(MethodName::Prks) && s.eta.is_none() {
        bail!("--method prks requires --eta");
    }
    Ok(())
}

fn gate(s: &StrategyArgs) -> Result<SampleGate> {
    let mut g = SampleGate::new(
        s.eta.expect("checked"),
        s.q.unwrap_or(SampleGate::DEFAULT_Q),
    );
    if s.two_sided {
        g.mode = ZTestMode::TwoSided;
    }
    g.validate()?;
    Ok(g)
}

fn strategy(method: MethodName, s: &StrategyArgs) -> Result<SelectionStrategy> {
    let st = match method {
        MethodName::Cyclic => SelectionStrategy::Cyclic,
        MethodName::Rk => SelectionStrategy::NormWeighted,
        MethodName::Grk => SelectionStrategy::Greedy,
        MethodName::Rgrk => SelectionStrategy::RelaxedGreedy {
            theta: s.theta.unwrap_or(0.75),
        },
        MethodName::Powert => SelectionStrategy::PowerT {
            t: s.t.expect("checked"),
        },
        MethodName::Prk => SelectionStrategy::MaxHomogenized,
        MethodName::Prks => SelectionStrategy::SampledMax(gate(s)?),
    };
    st.validate()?;
    Ok(st)
}

fn ridge_method(method: MethodName, s: &StrategyArgs) -> Result<RidgeMethod> {
    match method {
        MethodName::Prk => Ok(RidgeMethod::Prk),
        MethodName::Prks => Ok(RidgeMethod::Prks(gate(s)?)),
        other => bail!(
            "ridge solves support --method prk or prks, not {}",
            other.to_possible_value().expect("named").get_name()
        ),
    }
}

fn norm_mode(n: NormsArg) -> NormMode {
    match n {
        NormsArg::Exact => NormMode::Exact,
        NormsArg::Estimated => NormMode::Estimated,
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        bail!("--tau must be positive, got {tau}");
    }
    Ok(())
}

fn meta(name: String, a: &Matrix) -> InstanceMeta {
    InstanceMeta {
        name,
        m: a.rows(),
        n: a.cols(),
        nnz: a.nnz(),
        frobenius: a.frobenius_norm(),
    }
}

fn print_solve(out: &mut dyn Write, label: &str, rep: &SolveReport) -> Result<()> {
    writeln!(out, "method      {label}")?;
    writeln!(out, "iterations  {}", rep.iterations)?;
    writeln!(out, "terminated  {:?}", rep.terminated)?;
    writeln!(out, "metric      {:e}", rep.final_metric)?;
    writeln!(out, "seconds     {:.6}", rep.wall_time.as_secs_f64())?;
    writeln!(out, "setup       {:.6}", rep.setup_time.as_secs_f64())?;
    Ok(())
}

fn finish_single(
    common: &CommonArgs,
    label: String,
    instance: InstanceMeta,
    tol: f64,
    seed: u64,
    rep: &SolveReport,
    out: &mut dyn Write,
) -> Result<i32> {
    print_solve(out, &label, rep)?;
    if let Some(path) = &common.history {
        HistoryTable::single(label.clone(), &rep.history).write_csv(path)?;
    }
    if let Some(path) = &common.report {
        let report = BenchReport {
            instance,
            tol,
            trials: 1,
            seed_base: seed,
            methods: vec![summarize(label, std::slice::from_ref(rep), common.history.is_some())],
        };
        report.write_json(path)?;
    }
    Ok(if rep.terminated.converged() {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn cmd_solve(args: SolveArgs, out: &mut dyn Write) -> Result<i32> {
    let common = &args.common;
    check_strategy_flags(&[args.method], &args.strategy)?;
    let strat = strategy(args.method, &args.strategy)?;
    let rule = stop_rule(common.metric);
    if args.rhs.is_some() && rule == StopRule::KnownSolutionError {
        bail!("--rhs has no known solution; use --metric residual");
    }
    let source = load_source(&common.source, common.transpose, common.seed)?;
    let a = source.load()?;
    let instance = meta(source.name(), &a);
    let system = match &args.rhs {
        Some(path) => {
            let b = read_vector_market(path)
                .with_context(|| format!("reading {}", path.display()))?;
            LinearSystem::new(a, b, None)?
        }
        None => make_consistent_system(a)?,
    };
    let tol = default_tol(common, false);
    let mut cfg = SolveConfig::new(strat)
        .tol(tol)
        .max_iters(common.max_iters)
        .seed(common.seed)
        .stop_rule(rule)
        .time_budget(time_budget(common)?);
    if common.history.is_none() && common.report.is_none() {
        cfg.history_stride = usize::MAX;
    }
    let rep = solve(&system, &cfg)?;
    finish_single(common, strat.to_string(), instance, tol, common.seed, &rep, out)
}

fn cmd_ridge(args: RidgeArgs, out: &mut dyn Write) -> Result<i32> {
    let common = &args.common;
    check_tau(args.tau)?;
    check_strategy_flags(&[args.method], &args.strategy)?;
    let method = ridge_method(args.method, &args.strategy)?;
    let source = load_source(&common.source, common.transpose, common.seed)?;
    let a = source.load()?;
    let instance = meta(source.name(), &a);
    let p = make_ridge_problem(a, args.tau)?;
    let tol = default_tol(common, true);
    let norms = norm_mode(args.norms);
    let mut cfg = RidgeConfig::new(method, norms)
        .tol(tol)
        .max_iters(common.max_iters)
        .seed(common.seed)
        .stop_rule(stop_rule(common.metric))
        .x_star(p.x_star.clone());
    cfg.time_budget = Some(time_budget(common)?);
    if common.history.is_none() && common.report.is_none() {
        cfg.history_stride = usize::MAX;
    }
    let rep = ridge_solve(&p.a, &p.b, p.tau, &cfg)?;
    let label = MethodSpec::Ridge {
        method,
        norms,
        tau: args.tau,
    }
    .label();
    writeln!(
        out,
        "applies     {} (A) + {} (Aᵀ), setup {}",
        rep.applies, rep.transpose_applies, rep.setup_applies
    )?;
    finish_single(common, label, instance, tol, common.seed, &rep.solve, out)
}

fn cmd_bench(args: BenchArgs, out: &mut dyn Write) -> Result<i32> {
    let common = &args.common;
    check_strategy_flags(&args.method, &args.strategy)?;
    let ridge = args.tau.is_some();
    let methods = args
        .method
        .iter()
        .map(|&m| match args.tau {
            Some(tau) => {
                check_tau(tau)?;
                Ok(MethodSpec::Ridge {
                    method: ridge_method(m, &args.strategy)?,
                    norms: norm_mode(args.norms.unwrap_or(NormsArg::Exact)),
                    tau,
                })
            }
            None => Ok(MethodSpec::Linear(strategy(m, &args.strategy)?)),
        })
        .collect::<Result<Vec<_>>>()?;
    let source = load_source(&common.source, common.transpose, common.seed)?;
    let mut spec = ExperimentSpec::new(source, methods, default_tol(common, ridge))
        .trials(args.trials)
        .seed_base(common.seed)
        .max_iters(common.max_iters);
    spec.time_budget = Some(time_budget(common)?);
    spec.stop_rule = stop_rule(common.metric);
    if common.history.is_some() {
        spec = spec.record_history(1);
    }
    let report = run_experiment(&spec)?;
    write!(out, "{report}")?;
    if let Some(path) = &common.report {
        report.write_json(path)?;
    }
    if let Some(path) = &common.history {
        crate::bench::emit_history_csv(&report, path)?;
    }
    Ok(EXIT_OK)
}

fn cmd_gen(args: GenArgs, out: &mut dyn Write) -> Result<i32> {
    let a = match (&args.source.matrix, args.source.synth, args.source.chessboard) {
        (Some(path), _, _) => read_matrix_market(path, false)?,
        (_, Some((m, n)), _) => gen_gaussian(m, n, args.seed),
        (_, _, Some((r, c, d))) => gen_chessboard_boundary(r, c, d),
        _ => bail!("one of --matrix, --synth or --chessboard is required"),
    };
    match &args.output {
        Some(path) => write_matrix_market(&a, path)?,
        None => write_matrix_market_to(&a, out)?,
    }
    Ok(EXIT_OK)
}
