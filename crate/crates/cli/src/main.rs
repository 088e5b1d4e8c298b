use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phasedelay_cli::{cmd_markone_check, cmd_sweep, cmd_theory, cmd_traj, CliError, ExperimentConfig, Outputs};

/// Monte Carlo experiments on adaptive dyne phase measurements with a
/// delayed feedback loop.
#[derive(Debug, Parser)]
#[command(name = "phasedelay", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment file (`key = value` lines); defaults apply without one.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads. Affects speed only, never results.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Master seed, overriding `master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Variance against delay for every scheme, alpha and estimator.
    Sweep,
    /// Slope of the delay-induced variance for simplified feedback.
    MarkoneCheck,
    /// Tabulate the closed-form limits.
    Theory,
    /// Dump one trajectory step by step.
    Traj {
        /// Trajectory index, overriding `trajectory_index`.
        #[arg(long)]
        index: Option<usize>,
    },
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Outputs, CliError> {
    let cfg = load(cli)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    let out = match &cli.command {
        Command::Sweep => cmd_sweep(&cfg)?,
        Command::MarkoneCheck => cmd_markone_check(&cfg)?,
        Command::Theory => cmd_theory(&cfg)?,
        Command::Traj { index } => cmd_traj(&cfg, index.unwrap_or(cfg.trajectory_index))?,
    };
    for path in out.write_to(&cfg.out_dir)? {
        eprintln!("wrote {}", path.display());
    }
    print!("{}", out.report);
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) if out.passed == Some(false) => {
            eprintln!("error: {}", CliError::CheckFailed("criterion not met".into()));
            ExitCode::from(3)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
