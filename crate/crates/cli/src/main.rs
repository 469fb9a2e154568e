use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use efrb_cli::bench::{run_bench, write_csv, Experiment, Sweep, MIN_ITERATIONS};
use efrb_cli::inspect::inspect;
use efrb_cli::run::{run_scenario, RunOptions};
use efrb_cli::CliError;
use efrb_core::ledger::{read_chain_log, TxIndex};

#[derive(Parser)]
#[command(name = "efrb", version, about = "Redactable blockchain with witness-approved redactions")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and check its expectations.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario seed and EFRB_SEED.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the transcript as NDJSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write one node's chain.log.
        #[arg(long)]
        chain_log: Option<PathBuf>,
        /// Node whose chain goes to --chain-log (default: the CA).
        #[arg(long, requires = "chain_log")]
        node: Option<String>,
    },
    /// Time one experiment over a parameter sweep.
    Bench {
        #[arg(long)]
        experiment: String,
        /// e.g. wgn=50..300, policy=50..300:50 or attrs=10,100.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = MIN_ITERATIONS)]
        iterations: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Summarize a chain.log.
    Inspect {
        #[arg(long)]
        chain: PathBuf,
        /// Transaction index as slot:position.
        #[arg(long)]
        tx: Option<String>,
        /// Print the verdict audit trail.
        #[arg(long)]
        audit: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<ExitCode, CliError> {
    match cmd {
        Cmd::Run { scenario, seed, out, chain_log, node } => {
            let report = run_scenario(&RunOptions { scenario, seed, out, chain_log, node })?;
            println!(
                "scenario {} seed {}: {}/{} expectations met, {} events",
                report.scenario,
                report.seed,
                report.checked - report.failures.len().min(report.checked),
                report.checked,
                report.events
            );
            for f in &report.failures {
                println!("  FAIL {f}");
            }
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Cmd::Bench { experiment, sweep, csv, iterations, seed } => {
            let exp: Experiment = experiment.parse()?;
            let sweep: Sweep = match sweep {
                Some(s) => s.parse()?,
                None => format!("{}=50..300", exp.params()[0]).parse()?,
            };
            let rows = run_bench(exp, &sweep, iterations, seed)?;
            match csv {
                Some(path) => {
                    let f = File::create(&path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
                    write_csv(&rows, f)?;
                }
                None => write_csv(&rows, std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Inspect { chain, tx, audit } => {
            let f = File::open(&chain).map_err(|e| CliError::Io { path: chain.display().to_string(), source: e })?;
            let c = read_chain_log(BufReader::new(f))?;
            let ind = tx
                .map(|t| t.parse::<TxIndex>().map_err(|_| CliError::Usage(format!("bad transaction index {t:?}"))))
                .transpose()?;
            print!("{}", inspect(&c, ind, audit)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
