use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wbsn_cli::bench::{cmd_bench, reference_note, BenchSpec, DEFAULT_ITERATIONS};
use wbsn_cli::demo::{handshake_demo, Inject};
use wbsn_cli::simulate::cmd_simulate;
use wbsn_cli::CliError;

#[derive(Parser)]
#[command(name = "wbsn", version, about = "Body sensor network authentication and DoS simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario matrix and write metrics.csv and summary.txt.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// First seed of the run matrix.
        #[arg(long)]
        seed: Option<u64>,
        /// Seeds per matrix cell.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Time record sealing and opening by plaintext size; writes timing.csv.
    Bench {
        #[arg(long, default_value = "5,10,20,40,80,160")]
        sizes: String,
        #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
        iters: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Walk one sensor through every phase, optionally injecting a fault.
    HandshakeDemo {
        #[arg(long)]
        inject: Option<Inject>,
        #[arg(short, long)]
        verbose: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out, seed, runs } => {
            let done = cmd_simulate(&config, &out, seed, runs)?;
            println!("{} runs -> {}", done.records.len(), done.metrics_path.display());
            print!("{}", std::fs::read_to_string(&done.summary_path)?);
        }
        Command::Bench { sizes, iters, out } => {
            let spec = BenchSpec::new(BenchSpec::parse_sizes(&sizes)?, iters)?;
            let rows = cmd_bench(&spec, &out)?;
            print!("{}", wbsn_cli::bench::timing_csv(&rows));
            println!("{}", reference_note(&rows));
        }
        Command::HandshakeDemo { inject, verbose } => {
            let mut stdout = std::io::stdout().lock();
            handshake_demo(inject, verbose, &mut stdout)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wbsn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
