use std::path::PathBuf;

use clap::{Parser, Subcommand};
use sidwave_cli::commands::{
    cmd_convergence, cmd_diffusion, cmd_feasibility, cmd_run, cmd_sweep, cmd_testfn, SweepAxis,
};
use sidwave_cli::config::ExperimentConfig;
use sidwave_cli::exit_code_for;

/// Numerical laboratory for the semilinear wave equation with
/// time-decaying damping: runs, sweeps, feasibility curves, heat-flow
/// comparisons, test-function reports, and convergence studies.
#[derive(Parser)]
#[command(name = "sidwave", version, arg_required_else_help = true)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory for CSV tables and summaries.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Worker threads for sweep members.
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    jobs: usize,

    /// Config override `key.path=value` (TOML literal; repeatable).
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and record its time series.
    Run,
    /// Classify runs across a list of nonlinearity powers.
    SweepP,
    /// Classify runs across a list of damping sizes.
    SweepMu,
    /// Emit the constructive minimal-damping curve and its slope.
    Feasibility,
    /// Compare the linear solution against the matching heat flow.
    Diffusion,
    /// Evaluate the integrated test-function identity on a run.
    Testfn,
    /// Manufactured-solution convergence order study.
    Convergence,
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(dispatch(&cli));
}

fn dispatch(cli: &Cli) -> i32 {
    let Some(config_path) = &cli.config else {
        eprintln!("error: --config PATH is required");
        return 2;
    };
    let cfg = match ExperimentConfig::load(config_path, &cli.overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    if let Err(e) = std::fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create output directory {}: {e}", cli.out.display());
        return 2;
    }
    let result = match cli.command {
        Command::Run => cmd_run(&cfg, &cli.out),
        Command::SweepP => cmd_sweep(&cfg, &cli.out, cli.jobs, SweepAxis::P),
        Command::SweepMu => cmd_sweep(&cfg, &cli.out, cli.jobs, SweepAxis::Mu),
        Command::Feasibility => cmd_feasibility(&cfg, &cli.out),
        Command::Diffusion => cmd_diffusion(&cfg, &cli.out),
        Command::Testfn => cmd_testfn(&cfg, &cli.out),
        Command::Convergence => cmd_convergence(&cfg, &cli.out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
