use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use lpfp_core::config::RunConfig;
use lpfp_core::fictitious_play::BestResponseMethod;
use lpfp_core::lp::interchange::{read_problem, write_primal};
use lpfp_core::lp::SolverBackend;
use lpfp_core::report::{deterministic_baseline, run_experiment, CarbonPath};
use lpfp_core::scenario_tree::build_tree;
use lpfp_core::state_chains::build_chain;
use lpfp_core::Error;

/// Electricity-market mean-field game of optimal stopping, solved by LP
/// fictitious play.
#[derive(Parser)]
#[command(name = "lpfp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the equilibrium and write capacities, prices and exploitability.
    Run(RunArgs),
    /// Print the configuration as TOML.
    Config(Source),
    /// Print the carbon-price tree as JSON.
    DumpTree(Source),
    /// Print both state chains as JSON.
    DumpChains(Source),
    /// Solve an LP stored in a problem directory and write primal.txt there.
    LpSolve {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Backend::Auto)]
        backend: Backend,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Setting {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Dp,
    Lp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Auto,
    Dense,
    Sparse,
    Staircase,
}

impl From<Backend> for SolverBackend {
    fn from(b: Backend) -> Self {
        match b {
            Backend::Auto => SolverBackend::Auto,
            Backend::Dense => SolverBackend::Dense,
            Backend::Sparse => SolverBackend::Sparse,
            Backend::Staircase => SolverBackend::Staircase,
        }
    }
}

#[derive(clap::Args)]
struct Source {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in parameter set; `custom` requires --config.
    #[arg(long, value_enum)]
    setting: Option<Setting>,
}

impl Source {
    fn load(&self) -> Result<RunConfig> {
        match (self.setting, &self.config) {
            (Some(Setting::One), None) => Ok(RunConfig::setting1()),
            (Some(Setting::Two), None) | (None, None) => Ok(RunConfig::setting2()),
            (Some(Setting::Custom) | None, Some(path)) => Ok(RunConfig::load(path)?),
            (Some(Setting::Custom), None) => {
                bail!(Error::Config("--setting custom needs --config".into()))
            }
            (Some(_), Some(_)) => bail!(Error::Config(
                "--config only goes with --setting custom".into()
            )),
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Number of fictitious-play iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Replace the tree by one carbon trajectory: `min`, `max` or a CSV file of levels.
    #[arg(long)]
    deterministic_path: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Best-response method.
    #[arg(long, value_enum)]
    solver: Option<Method>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write exploitability as a fraction of its initial value.
    #[arg(long)]
    relative: bool,
}

fn read_levels(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>().map_err(|_| {
                Error::InvalidPath(format!("{}: `{t}` is not a number", path.display())).into()
            })
        })
        .collect()
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = args.source.load()?;
    if let Some(n) = args.iters {
        config.solver.iterations = n;
    }
    if let Some(m) = args.solver {
        config.solver.best_response = match m {
            Method::Dp => BestResponseMethod::Dp,
            Method::Lp => BestResponseMethod::Lp,
        };
    }
    if let Some(seed) = args.seed {
        config.solver.seed = seed;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    config.validate()?;
    let start = Instant::now();
    let mut report = match args.deterministic_path.as_deref() {
        None => run_experiment(&config)?,
        Some("min") => deterministic_baseline(&config, &CarbonPath::Min)?,
        Some("max") => deterministic_baseline(&config, &CarbonPath::Max)?,
        Some(file) => {
            deterministic_baseline(&config, &CarbonPath::Levels(read_levels(Path::new(file))?))?
        }
    };
    if args.relative {
        report.make_exploitability_relative();
    }
    report.emit(&config.output_dir)?;
    for w in &report.metadata.warnings {
        eprintln!("warning: {w}");
    }
    let [c0, r0] = report.metadata.initial_exploitability;
    let [c, r] = report.metadata.final_exploitability;
    println!(
        "{} iterations in {:.2} s; exploitability {c0:.4e}/{r0:.4e} -> {c:.4e}/{r:.4e}; output in {}",
        report.metadata.iterations,
        start.elapsed().as_secs_f64(),
        config.output_dir.display()
    );
    Ok(())
}

fn lp_solve(dir: &Path, backend: Backend) -> Result<()> {
    let lp = read_problem(dir)?;
    let solver = SolverBackend::from(backend).solver_for(&lp);
    let solution = solver.solve(&lp)?;
    write_primal(&solution.x, dir)?;
    println!(
        "{}: objective {:?}, max residual {:.3e}",
        solver.name(),
        solution.objective,
        lp.max_residual(&solution.x)
    );
    Ok(())
}

/// Writes to stdout; a closed pipe ends output quietly.
fn output(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e).context("writing to stdout"),
        _ => Ok(()),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Config(source) => output(&source.load()?.to_toml()),
        Command::DumpTree(source) => {
            let config = source.load()?;
            output(&(build_tree(&config.scenario_spec()?)?.to_json() + "\n"))
        }
        Command::DumpChains(source) => {
            let config = source.load()?;
            let conventional = build_chain(&config.conventional_params())?;
            let renewable = build_chain(&config.renewable_params())?;
            output(&format!(
                "{{\"conventional\":{},\"renewable\":{}}}\n",
                conventional.to_json(),
                renewable.to_json()
            ))
        }
        Command::LpSolve { dir, backend } => lp_solve(&dir, backend),
    }
}

/// Exit status by failure category.
fn exit_code(err: &anyhow::Error) -> u8 {
    let Some(e) = err.downcast_ref::<Error>() else {
        return 5;
    };
    match e {
        Error::Io { .. } => 5,
        Error::Config(_)
        | Error::InvalidScenario(_)
        | Error::InvalidPath(_)
        | Error::InvalidDiffusion(_)
        | Error::GridTooCoarse { .. }
        | Error::DegenerateDensity(_)
        | Error::InvalidMarket(_)
        | Error::NegativeDemand { .. }
        | Error::ZeroProbabilityPath
        | Error::TimeOutOfRange { .. }
        | Error::Dimension(_) => 3,
        Error::ProblemTooLarge { .. } | Error::Infeasible | Error::Unbounded | Error::Solver(_) => {
            4
        }
        Error::Numerical(_) | Error::Diverged(_) => 6,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
