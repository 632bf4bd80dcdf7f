//! `hda`: one-off solves, the figure harnesses and the brute-force oracle.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use hda_core::harness::{
    run_fig2, run_fig3, run_phase, write_fig2, write_fig3, write_phase, Fig2Config, Fig3Config, PhaseConfig,
};
use hda_core::io::{read_solution, write_json, write_solution, write_spike_csv, write_trace_csv, write_with, SolutionFile};
use hda_core::oracle::{default_feas_tol, oracle_basis_pursuit, verify_lasso_kkt, KktReport};
use hda_core::problem::{InstanceSpec, ProblemInstance};
use hda_core::rng::derive_seed;
use hda_core::{run, BcdPolicy, NoiseModel, OracleSolution, SignalSource, SolverConfig, SolverKind};
use serde::{Deserialize, Serialize};

use config::{load_config, parse_triple};

#[derive(Parser)]
#[command(name = "hda", version, about = "Spiking and analog sparse-recovery solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver on a stored or synthetic instance.
    Solve(SolveArgs),
    /// Noiseless recovery: trace, energy, potentials and overlay.
    Fig2(Fig2Args),
    /// Recovery under multiplicative white noise.
    Fig3(Fig3Args),
    /// HDA versus LBI over a grid of indeterminacy and sparsity.
    Phase(PhaseArgs),
    /// Exhaustive minimum-l1 solution of a small instance.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum NoiseArg {
    #[default]
    None,
    MultWhite,
    AddWhite,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum PolicyArg {
    #[default]
    Cyclic,
    Random,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Lbi,
    Bcd,
    Hda,
    Hopping,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Lbi => SolverKind::Lbi,
            SolverArg::Bcd => SolverKind::Bcd,
            SolverArg::Hda => SolverKind::Hda,
            SolverArg::Hopping => SolverKind::Hopping,
        }
    }
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["instance", "synthetic"]))]
struct SolveArgs {
    /// TOML file with solver settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Instance JSON file.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Random instance `m,n,nz` with amplitudes in [-0.5, 0.5).
    #[arg(long, value_name = "M,N,NZ", value_parser = parse_triple)]
    synthetic: Option<(usize, usize, usize)>,
    #[arg(long)]
    lambda: Option<f64>,
    /// LBI step size.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    max_iters: Option<u64>,
    /// Stall tolerance on the relative residual; 0 runs the full budget.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    stall_window: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    noise: Option<NoiseArg>,
    #[arg(long)]
    noise_level: Option<f64>,
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long)]
    sample_every: Option<u64>,
    #[arg(long, value_enum)]
    bcd_policy: Option<PolicyArg>,
    #[arg(long, default_value = "trace.csv")]
    trace_out: PathBuf,
    #[arg(long, default_value = "solution.json")]
    solution_out: PathBuf,
    /// Spike log (`time,node,sign`) for the event-driven solver.
    #[arg(long)]
    spikes_out: Option<PathBuf>,
    /// Where to save the synthetic instance.
    #[arg(long)]
    instance_out: Option<PathBuf>,
}

/// Settings shared by the config file and the flags of `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SolveSettings {
    solver: SolverKind,
    lambda: f64,
    delta: f64,
    max_iters: u64,
    tol: f64,
    stall_window: usize,
    seed: u64,
    noise: NoiseArg,
    noise_level: f64,
    noise_seed: Option<u64>,
    sample_every: u64,
    bcd_policy: PolicyArg,
}

impl Default for SolveSettings {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolveSettings {
            solver: SolverKind::Hda,
            lambda: d.lambda,
            delta: d.delta,
            max_iters: d.max_iters,
            tol: d.tol,
            stall_window: d.stall_window,
            seed: 1,
            noise: NoiseArg::None,
            noise_level: 0.0,
            noise_seed: None,
            sample_every: 1,
            bcd_policy: PolicyArg::Cyclic,
        }
    }
}

macro_rules! override_fields {
    ($target:expr, $args:expr, $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $args.$field { $target.$field = v.into(); })+
    };
}

#[derive(Args)]
struct Fig2Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    nz: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    sample_every: Option<u64>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
}

#[derive(Args)]
struct Fig3Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    nz: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    sample_every: Option<u64>,
    #[arg(long)]
    noise_level: Option<f64>,
    #[arg(long)]
    noise_seed: Option<u64>,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated m/n ratios.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Comma-separated nz/n ratios.
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lbi_lambda: Option<f64>,
    #[arg(long)]
    lbi_delta: Option<f64>,
    #[arg(long, value_enum)]
    hda_solver: Option<SolverArg>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Also check the Lasso optimality conditions at this level.
    #[arg(long)]
    lambda: Option<f64>,
    /// Solution file to check instead of the oracle output.
    #[arg(long, requires = "lambda")]
    solution: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    kkt_tol: f64,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Solver(hda_core::Error),
}

impl From<hda_core::Error> for Failure {
    fn from(e: hda_core::Error) -> Self {
        Failure::Solver(e)
    }
}

type CmdResult = Result<(), Failure>;

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

/// Configuration problems found after parsing are usage errors too.
fn check(r: hda_core::Result<()>) -> CmdResult {
    r.map_err(|e| Failure::Usage(e.to_string()))
}

fn solve(args: SolveArgs) -> CmdResult {
    let mut s: SolveSettings = load_config(args.config.as_deref()).map_err(Failure::Usage)?;
    override_fields!(
        s, args, solver, lambda, delta, max_iters, tol, stall_window, seed, noise, noise_level, sample_every,
        bcd_policy
    );
    if args.noise_seed.is_some() {
        s.noise_seed = args.noise_seed;
    }
    let cfg = SolverConfig {
        lambda: s.lambda,
        delta: s.delta,
        max_iters: s.max_iters,
        tol: s.tol,
        stall_window: s.stall_window,
        bcd_policy: match s.bcd_policy {
            PolicyArg::Cyclic => BcdPolicy::Cyclic,
            PolicyArg::Random => BcdPolicy::Random {
                seed: derive_seed(s.seed, &[4]),
            },
            PolicyArg::Greedy => BcdPolicy::Greedy,
        },
    };
    check(cfg.validate())?;
    if s.sample_every == 0 {
        return usage("sample_every must be >= 1");
    }
    if !(s.noise_level >= 0.0) {
        return usage(format!("noise level must be >= 0, got {}", s.noise_level));
    }

    let instance = match (&args.instance, args.synthetic) {
        (Some(path), _) => ProblemInstance::read_json(path)?,
        (None, Some((m, n, nz))) => {
            let spec = InstanceSpec {
                m,
                n,
                nz,
                amp_lo: -0.5,
                amp_hi: 0.5,
                seed: s.seed,
            };
            spec.generate().or_else(|e| usage(e.to_string()))?
        }
        (None, None) => unreachable!("clap enforces an instance source"),
    };
    if let Some(path) = &args.instance_out {
        instance.write_json(path)?;
    }

    let m = instance.dictionary.rows();
    let noise_seed = s.noise_seed.unwrap_or_else(|| derive_seed(s.seed, &[3]));
    let model = match s.noise {
        NoiseArg::None => None,
        NoiseArg::MultWhite => Some(NoiseModel::multiplicative_white(s.noise_level, noise_seed)),
        NoiseArg::AddWhite => Some(NoiseModel::additive_white(s.noise_level, noise_seed)),
        NoiseArg::Static => Some(NoiseModel::static_gaussian(m, s.noise_level, noise_seed)),
    };
    let source = match &model {
        None => SignalSource::Clean(&instance.clean_signal),
        Some(model) => SignalSource::Noisy {
            clean: &instance.clean_signal,
            model,
        },
    };

    let result = match run(s.solver, &instance.dictionary, source, &cfg, s.sample_every) {
        Err(hda_core::Error::InvalidConfig(msg)) => return usage(msg),
        other => other?,
    };
    write_with(&args.trace_out, |w| write_trace_csv(w, &result.trace))?;
    let solution = SolutionFile::from_run(&result, cfg.lambda, instance.seed);
    write_solution(&args.solution_out, &solution)?;
    if let Some(path) = &args.spikes_out {
        write_with(path, |w| write_spike_csv(w, &result.spikes))?;
    }
    let last = result.final_record();
    println!(
        "{}: {} at t = {}, rel_residual {:.3e}, l1 {:.6}, l0 {}",
        s.solver.name(),
        result.stop_reason.name(),
        last.t,
        last.rel_residual,
        last.l1,
        last.l0
    );
    Ok(())
}

fn fig2(args: Fig2Args) -> CmdResult {
    let mut cfg: Fig2Config = load_config(args.config.as_deref()).map_err(Failure::Usage)?;
    override_fields!(cfg, args, seed, m, n, nz, lambda, iters, sample_every, solver);
    let res = run_fig2(&cfg)?;
    write_fig2(&res, &cfg, &args.out_dir)?;
    println!(
        "fig2 seed {}: relative error {:.3e}, rel_residual {:.3e} at t = {}",
        cfg.seed,
        res.rel_error,
        res.run.final_record().rel_residual,
        res.run.final_t()
    );
    Ok(())
}

fn fig3(args: Fig3Args) -> CmdResult {
    let mut cfg: Fig3Config = load_config(args.config.as_deref()).map_err(Failure::Usage)?;
    override_fields!(cfg, args, seed, m, n, nz, lambda, iters, sample_every, noise_level);
    if args.noise_seed.is_some() {
        cfg.noise_seed = args.noise_seed;
    }
    let res = run_fig3(&cfg)?;
    write_fig3(&res, &cfg, &args.out_dir)?;
    println!(
        "fig3 seed {}: rel_mse {:.3e}, clean rel_residual {:.3e} at t = {}",
        cfg.seed,
        res.rel_mse,
        res.run.final_record().rel_residual,
        res.run.final_t()
    );
    Ok(())
}

fn phase(args: PhaseArgs) -> CmdResult {
    let mut cfg: PhaseConfig = load_config(args.config.as_deref()).map_err(Failure::Usage)?;
    override_fields!(cfg, args, seed, n, alphas, betas, realizations, iters, lambda, lbi_lambda, hda_solver);
    if args.lbi_delta.is_some() {
        cfg.lbi_delta = args.lbi_delta;
    }
    let grid = match run_phase(&cfg) {
        Err(hda_core::Error::InvalidConfig(msg)) => return usage(msg),
        other => other?,
    };
    write_phase(&grid, &cfg, &args.out_dir)?;
    println!(
        "phase n = {}: {} cells, grand-mean rel_l1_diff {:.3e}",
        grid.n,
        grid.cells.len(),
        grid.grand_mean_l1_diff()
    );
    Ok(())
}

#[derive(Serialize)]
struct OracleReport {
    u_star: Vec<f64>,
    l1: f64,
    support: Vec<usize>,
    feasible: bool,
    unique: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    kkt: Option<KktReport>,
}

fn oracle(args: OracleArgs) -> CmdResult {
    let instance = ProblemInstance::read_json(&args.instance)?;
    let f = &instance.clean_signal;
    let sol = oracle_basis_pursuit(&instance.dictionary, f, default_feas_tol(f))?;
    let kkt = match args.lambda {
        Some(lambda) => {
            let u = match &args.solution {
                Some(path) => read_solution(path)?.u_vector(),
                None => sol.u_star.clone(),
            };
            Some(verify_lasso_kkt(&u, &instance.dictionary, f, lambda, args.kkt_tol)?)
        }
        None => None,
    };
    let OracleSolution {
        u_star,
        l1,
        support,
        feasible,
        unique,
    } = sol;
    let report = OracleReport {
        u_star: u_star.iter().copied().collect(),
        l1,
        support,
        feasible,
        unique,
        kkt,
    };
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn dispatch(cmd: Command) -> CmdResult {
    match cmd {
        Command::Solve(a) => solve(a),
        Command::Fig2(a) => fig2(a),
        Command::Fig3(a) => fig3(a),
        Command::Phase(a) => phase(a),
        Command::Oracle(a) => oracle(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\n{}", Cli::command().render_usage());
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            log::debug!("{e:?}");
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

