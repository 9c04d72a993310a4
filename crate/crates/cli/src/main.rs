use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use superdist_cli::{
    cmd_analyze, cmd_paradiso_demo, cmd_potato_demo, cmd_simulate, cmd_verify, CliError, ExperimentConfig,
    SimulateOptions,
};

#[derive(Debug, Parser)]
#[command(name = "superdist", version, about = "Superdistribution market experiments and protocol demos")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expected revenue and effective price per entry index (curve.csv).
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Seeded market simulation (edges, ledger, adoption, revenue by index).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<u32>,
        /// Fail unless every Monte Carlo mean is within 4 standard errors of the analytic value.
        #[arg(long)]
        check_analytic: bool,
    },
    /// Four-buyer TAN chain under the Potato scheme.
    PotatoDemo {
        /// Replay an exported TAN registry instead of the built-in chain.
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Signed-container resale chain with receipts.
    ParadisoDemo {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Verify a signed container file.
    Verify {
        file: PathBuf,
        /// File of hex public keys, one per line.
        #[arg(long)]
        trust: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut log = io::stdout().lock();
    match cli.command {
        Command::Analyze { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            cmd_analyze(&cfg, &out, &mut log).map(drop)
        }
        Command::Simulate {
            config,
            out,
            seed,
            runs,
            check_analytic,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let opts = SimulateOptions {
                seed,
                runs,
                check_analytic,
            };
            cmd_simulate(&cfg, &out, &opts, &mut log)
        }
        Command::PotatoDemo { registry, out } => cmd_potato_demo(registry.as_deref(), out.as_deref(), &mut log),
        Command::ParadisoDemo { out } => cmd_paradiso_demo(&out, &mut log),
        Command::Verify { file, trust } => cmd_verify(&file, trust.as_deref(), &mut log).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("superdist: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
