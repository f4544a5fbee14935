//! `hamsearch` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 iteration budget exhausted (outputs are still written).

use clap::{Args, Parser, Subcommand};
use hamsearch::runner::{self, ExperimentConfig, ReportFlag};
use hamsearch::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hamsearch", version, about = "Search operator bases for parent Hamiltonians of reference states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a Hamiltonian to the reference states at the training sizes.
    Recover(RunArgs),
    /// Fit on small sizes with the largest weighted up, then test on larger sizes.
    Extrapolate(RunArgs),
    /// Evaluate the loss on a two-parameter grid and compare descent paths.
    Scan(RunArgs),
    /// Time the main kernels for the configured system.
    Bench(RunArgs),
    /// Check a config file without running anything.
    ValidateConfig(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides both the start and the perturbation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (all cores when absent).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_BUDGET: u8 = 4;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    let mut src = std::error::Error::source(e);
    while let Some(s) = src {
        eprintln!("  caused by: {s}");
        src = s.source();
    }
    ExitCode::from(if e.is_config_error() { EXIT_CONFIG } else { EXIT_NUMERIC })
}

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    let cfg = ExperimentConfig::load(path).map_err(|e| {
        eprintln!("error: cannot load {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })?;
    cfg.validate().map_err(|e| fail(&e))?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::ValidateConfig(a) => match load(&a.config) {
            Ok(_) => {
                println!("{}: ok", a.config.display());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Recover(a) => run(a, Kind::Recover),
        Command::Extrapolate(a) => run(a, Kind::Extrapolate),
        Command::Scan(a) => run(a, Kind::Scan),
        Command::Bench(a) => run(a, Kind::Bench),
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Recover,
    Extrapolate,
    Scan,
    Bench,
}

fn run(args: RunArgs, kind: Kind) -> ExitCode {
    let mut cfg = match load(&args.config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(t) = args.threads {
        if let Err(e) = rayon_pool(t) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let base_dir = args.config.parent().map(Path::to_path_buf);
    let out = runner::output_dir(&cfg, args.out.as_deref());
    let result = execute(&cfg, kind, base_dir.as_deref(), &out);
    match result {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}

fn rayon_pool(threads: usize) -> Result<(), String> {
    if threads == 0 {
        return Err("--threads must be at least 1".into());
    }
    runner::set_threads(threads).map_err(|e| e.to_string())
}

fn execute(cfg: &ExperimentConfig, kind: Kind, base_dir: Option<&Path>, out: &Path) -> hamsearch::Result<ExitCode> {
    match kind {
        Kind::Recover | Kind::Extrapolate => {
            let run = match kind {
                Kind::Recover => runner::run_recover(cfg, base_dir)?,
                _ => runner::run_extrapolate(cfg, base_dir)?,
            };
            run.persist(out)?;
            print!("{}", run.report.table());
            println!("results written to {}", out.display());
            if run.report.has_flag(ReportFlag::BudgetExhausted) {
                eprintln!("warning: iteration budget exhausted before convergence");
                return Ok(ExitCode::from(EXIT_BUDGET));
            }
            Ok(ExitCode::SUCCESS)
        }
        Kind::Scan => {
            let r = runner::run_scan(cfg, base_dir)?;
            runner::persist_scan(cfg, &r, out)?;
            let s = r.summary();
            println!(
                "grid {}x{}: best {:.6e} at ({}, {})",
                s.n1, s.n2, s.grid_best_loss, s.grid_best[0], s.grid_best[1]
            );
            for (name, p) in [("conjugate gradient", &s.conjugate_gradient), ("steepest descent", &s.steepest_descent)] {
                println!(
                    "{name}: loss {:.6e} at {:?} after {} iterations, {} evaluations ({})",
                    p.loss, p.endpoint, p.iterations, p.evaluations, p.termination
                );
            }
            println!("results written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Kind::Bench => {
            let r = runner::run_bench(cfg, base_dir)?;
            std::fs::create_dir_all(out)?;
            r.save(&out.join("bench.json"))?;
            print!("{}", r.table());
            Ok(ExitCode::SUCCESS)
        }
    }
}
