use std::path::PathBuf;
use std::process::ExitCode;

use burgers_fbsde_cli::commands::{self, budget_lines};
use burgers_fbsde_cli::{configure_threads, CliError, CliResult, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "burgers-fbsde", version, about = "Probabilistic and spectral solvers for the periodic backward Burgers equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides mc.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides outputs.directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Picard iteration of the stochastic system.
    Solve,
    /// Pseudo-spectral reference solution.
    Oracle,
    /// Probabilistic solution against the oracle.
    Compare,
    /// Error against a swept parameter, with a fitted log-log slope.
    Converge,
    /// Solve and run the diagnostics suite.
    Diagnose,
    /// Print K, gamma(T) and T0.
    Budget,
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads(cli.threads)?;
    let path = cli.config.ok_or_else(|| CliError::Config("--config: a configuration file is required".into()))?;
    let mut config = ExperimentConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        config.mc.seed = seed;
    }
    if let Some(out) = cli.out {
        config.outputs.directory = out;
    }
    let out = config.outputs.directory.clone();
    match cli.command {
        Command::Budget => {
            let budget = commands::run_budget(&config)?;
            for line in budget_lines(&budget) {
                println!("{line}");
            }
        }
        Command::Solve => {
            let report = commands::run_solve(&config, &out)?;
            for line in budget_lines(&report.budget) {
                println!("{line}");
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "picard: {} iterations, converged = {}, last diff = {:.3e}",
                report.iterations,
                report.converged,
                report.diff_history.last().copied().unwrap_or(0.0)
            );
            if config.diagnostics.enabled {
                report_suite(&out)?;
            }
        }
        Command::Oracle => {
            let report = commands::run_oracle(&config, &out)?;
            println!(
                "oracle: {} steps, max PDE residual {:.3e}",
                report.steps, report.pde_residual_max
            );
        }
        Command::Compare => {
            let report = commands::run_compare(&config, &out)?;
            for line in budget_lines(&report.budget) {
                println!("{line}");
            }
            println!(
                "relative L2 error at s = 0: {:.4e}  max L2: {:.4e}  max Linf: {:.4e}",
                report.relative_l2_at_start, report.max_l2_error, report.max_linf_error
            );
        }
        Command::Converge => {
            let report = commands::run_convergence(&config, &out)?;
            for (v, e) in report.values.iter().zip(&report.errors) {
                println!("{v:>12}  {e:.4e}");
            }
            match report.slope {
                Some(s) => println!("log-log slope: {s:.3}"),
                None => println!("log-log slope: undefined"),
            }
        }
        Command::Diagnose => {
            let suite = commands::run_diagnose(&config, &out)?;
            print!("{}", suite.table());
            let failed = suite.checks.iter().filter(|c| !c.pass).count();
            if failed > 0 {
                return Err(CliError::Diagnostics(failed));
            }
        }
    }
    Ok(())
}

/// Prints the stored table and fails if any check did.
fn report_suite(out: &std::path::Path) -> CliResult<()> {
    let text = std::fs::read_to_string(out.join("diagnostics.json"))?;
    let suite: burgers_fbsde::diagnostics::DiagnosticsReport = serde_json::from_str(&text)?;
    print!("{}", suite.table());
    let failed = suite.checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::Diagnostics(failed));
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
