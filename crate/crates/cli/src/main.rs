use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use online_alloc_cli::config::ExperimentConfig;
use online_alloc_cli::figure::{run_figure, write_figure, FigureId};
use online_alloc_cli::runner::{run_experiment, RunOptions};
use online_alloc_cli::verify::{parse_fault, verify_config, verify_default};
use online_alloc_cli::{csvio, output_path, write_file, CliError, OUTPUT_DIR_ENV};

/// Online resource allocation by dual mirror descent: experiments, invariant
/// checks and figure data.
#[derive(Debug, Parser)]
#[command(name = "online-alloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write one CSV row per run.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides master_seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the invariant suite and report counts per check.
    Verify {
        /// Verify the runs of this experiment instead of the built-in suite.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, hide = true)]
        fault: Option<String>,
    },
    /// Write the tidy CSV behind one of the standard figures.
    Figure {
        /// regret_vs_T, regret_vs_m, regret_vs_d, ergodic_regret or stepsize_sensitivity
        id: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn override_dir() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from)
}

fn destination(path: &Path) -> PathBuf {
    output_path(path, override_dir().as_deref())
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run {
            config,
            out,
            threads,
            seed,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = out
                .or_else(|| cfg.output.clone())
                .ok_or_else(|| CliError::Config("no output path: pass --out or set `output`".into()))?;
            let opts = RunOptions {
                threads,
                seed,
                ..RunOptions::default()
            };
            let exp = run_experiment(&cfg, &opts)?;
            let mut buf = Vec::new();
            csvio::write_records(&mut buf, &exp.records())?;
            let path = destination(&out);
            write_file(&path, &buf)?;
            eprintln!("wrote {} records to {}", exp.results.len(), path.display());
            Ok(())
        }
        Command::Verify { config, fault } => {
            let fault = fault.as_deref().map(parse_fault).transpose()?;
            let report = match config {
                Some(path) => verify_config(&ExperimentConfig::load(&path)?, fault)?,
                None => verify_default(fault)?,
            };
            println!("{report}");
            if report.all_pass() {
                Ok(())
            } else {
                Err(CliError::Invariant("see report above".into()))
            }
        }
        Command::Figure { id, out, threads } => {
            let fig: FigureId = id.parse()?;
            let opts = RunOptions {
                threads,
                ..RunOptions::default()
            };
            let rows = run_figure(fig, &opts)?;
            let mut buf = Vec::new();
            write_figure(&mut buf, fig, fig.config().master_seed, &rows)?;
            let path = destination(&out);
            write_file(&path, &buf)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
