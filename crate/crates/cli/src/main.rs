use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Deterministic pipeline-quantization simulator.
#[derive(Parser)]
#[command(name = "qpipe", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trace CSVs plus a summary.
    ///
    /// Exits 0 when the scenario's embedded assertions pass, 1 when an
    /// assertion fails, and 2 on invalid configuration.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Output directory for traces and the summary.
        #[arg(long)]
        out: PathBuf,
        /// Override the model and dataset seeds.
        #[arg(long)]
        seed: Option<u64>,
        /// Let the controller step through every supported bitwidth instead
        /// of powers of two only.
        #[arg(long)]
        ladder: bool,
    },
    /// Summarize an existing trace directory.
    Summarize {
        /// Directory previously produced by `run`.
        trace_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            ladder,
        } => {
            let sc = match qpipe_cli::load_scenario(&scenario) {
                Ok(sc) => sc,
                Err(e) => {
                    eprintln!("invalid scenario: {e}");
                    return ExitCode::from(2);
                }
            };
            match qpipe_cli::run_scenario(&sc, &out, seed, ladder) {
                Ok(outcome) => {
                    for line in &outcome.summary_lines {
                        println!("{line}");
                    }
                    if outcome.passed() {
                        println!("scenario '{}' passed", sc.name);
                        ExitCode::SUCCESS
                    } else {
                        for f in &outcome.failures {
                            eprintln!("assertion failed: {f}");
                        }
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Summarize { trace_dir } => match qpipe_cli::summarize_run(&trace_dir) {
            Ok(summary) => {
                for line in summary.render_text() {
                    println!("{line}");
                }
                if let Err(e) = qpipe_cli::summary::write_summary_csv(&summary, &trace_dir) {
                    eprintln!("could not write summary.csv: {e}");
                    return ExitCode::from(2);
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("summarize failed: {e}");
                ExitCode::from(2)
            }
        },
    }
}
