//! `optopiston`: sweeps, figure data, convergence checks and single solves.
//!
//! Exit codes: 0 success, 1 invalid input, 2 solver failure, 3 i/o error.

mod config;
mod converge;
mod error;
mod figures;
mod jobs;
mod output;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use optopiston::observables::{evaluate_engine, wigner, WignerGrid};
use optopiston::SolverMethod;
use serde_json::json;

use config::{ConfigFile, Overrides, Resolved};
use error::CliError;
use jobs::Engine;

#[derive(Parser, Debug)]
#[command(name = "optopiston", version, about = "Steady states and figures of merit of optomechanical piston engines")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Engines to run, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    engines: Option<Vec<Engine>>,
    /// Override any engine parameter, e.g. `--set g=0.1`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Fock dimensions of modes a, b, c, e.g. `--dims 5,5,26`.
    #[arg(long, global = true, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, global = true)]
    method: Option<Method>,
    /// Master seed of the classical ensembles.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Classical trajectories per ensemble.
    #[arg(long, global = true)]
    n_traj: Option<usize>,
    /// Classical steps per trajectory.
    #[arg(long, global = true)]
    n_steps: Option<usize>,
    /// 10^4 trajectories of 10^7 steps. Takes days on a desktop.
    #[arg(long, global = true)]
    full_profile: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Direct,
    Eigen,
}

impl From<Method> for SolverMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Direct => SolverMethod::Direct,
            Method::Eigen => SolverMethod::Eigen,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One CSV row per engine and parameter value.
    Sweep {
        /// n_a, n_b, n_c, kappa_l, g, kappa_a, kappa_b or kappa_c.
        #[arg(long)]
        param: String,
        /// Comma separated; defaults to 26 points on [0, 0.5] for n_b.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
        /// Defaults to <out-dir>/sweep_<param>.csv.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Data files for one figure (fig2, fig3a..fig3f, fig4a, fig4b, fig5) or `all`.
    Figure { id: String },
    /// Re-solve at larger dims and report the change of every observable.
    Converge {
        /// Target dims; defaults to the base dims plus (1, 1, 5).
        #[arg(long, value_delimiter = ',')]
        to: Option<Vec<usize>>,
    },
    /// Solve one quantum engine and print its figures of merit.
    Solve {
        #[arg(long, default_value = "single")]
        engine: Engine,
        /// Write the density matrix as JSON.
        #[arg(long)]
        dump_rho: Option<PathBuf>,
        /// Write the mechanical Wigner function as JSON.
        #[arg(long)]
        wigner: Option<PathBuf>,
    },
}

fn resolve(global: &GlobalArgs) -> Result<Resolved, CliError> {
    let file = global.config.as_deref().map(ConfigFile::load).transpose()?;
    let flags = Overrides {
        set: global.set.clone(),
        dims: global.dims.clone(),
        method: global.method.map(Into::into),
        seed: global.seed,
        threads: global.threads,
        out_dir: global.out_dir.clone(),
        n_traj: global.n_traj,
        n_steps: global.n_steps,
        full_profile: global.full_profile,
    };
    config::resolve(file.as_ref(), &flags)
}

fn solve(resolved: &Resolved, engine: Engine, dump_rho: Option<PathBuf>, wigner_path: Option<PathBuf>) -> Result<(), CliError> {
    let Some(variant) = engine.variant() else {
        return Err(CliError::Validation("solve applies to the quantum engines only".into()));
    };
    let config = resolved.engine(variant);
    let eval = evaluate_engine(config, &resolved.solve_options())?;
    let meta = output::metadata("solve", resolved, json!({ "engine": engine.name() }));
    output::say(
        &serde_json::to_string_pretty(&json!({
            "engine": engine.name(),
            "figures": eval.figures,
            "method": eval.steady.method,
            "residual": eval.steady.residual,
            "relative_residual": eval.steady.relative_residual,
            "degeneracy_margin": eval.steady.degeneracy_margin,
        }))?
    );
    if let Some(path) = dump_rho {
        output::write_json(&path, &meta, &eval.steady.rho.dump())?;
    }
    if let Some(path) = wigner_path {
        output::write_json(&path, &meta, &wigner(&eval.marginal, &WignerGrid::default()))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let resolved = resolve(&cli.global)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolved.threads)
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    let engines = cli.global.engines.clone();
    pool.install(|| match cli.command {
        Command::Sweep { param, values, output } => {
            let engines = engines.unwrap_or_else(|| vec![Engine::Single, Engine::Cascade]);
            sweep::run(&resolved, &engines, &param, values, output)
        }
        Command::Figure { id } => {
            let engines = engines.unwrap_or_else(|| Engine::ALL.to_vec());
            match figures::run(&resolved, &engines, &id)? {
                0 => Ok(()),
                n => Err(CliError::Solver(format!("{n} figure data points failed"))),
            }
        }
        Command::Converge { to } => {
            let engines = engines.unwrap_or_else(|| vec![Engine::Single, Engine::Cascade]);
            for d in converge::run(&resolved, &engines, to)? {
                output::say(&format!(
                    "{:<8} {:<13} abs {:>10} rel {:>10}",
                    d.engine,
                    d.observable,
                    d.abs_delta.map_or("-".into(), |x| format!("{x:.3e}")),
                    d.rel_delta.map_or("-".into(), |x| format!("{x:.3e}")),
                ));
            }
            Ok(())
        }
        Command::Solve { engine, dump_rho, wigner } => solve(&resolved, engine, dump_rho, wigner),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
