use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use blockres::harness::{canonical_example, run_scenario_path, self_test, ResourceReport, SEED_ENV};

/// Block-coherence and multipartite-entanglement interconversion checker.
#[derive(Debug, Parser)]
#[command(name = "blockres", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, clap::Args)]
struct Output {
    /// Output format; `csv` emits only the measure table.
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Run the three-party four-level example on a random full-rank state.
    Canonical {
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: Output,
    },
    /// Run every property suite on random instances.
    Selftest {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the entropy tolerance.
        #[arg(long)]
        tau_ent: Option<f64>,
        #[command(flatten)]
        out: Output,
    },
    /// Re-emit a saved report.
    Report {
        report: PathBuf,
        #[command(flatten)]
        out: Output,
    },
}

const EXIT_FAILED_CHECK: u8 = 1;
const EXIT_INPUT: u8 = 2;

fn seed_or_env(seed: Option<u64>) -> blockres::Result<u64> {
    match seed {
        Some(s) => Ok(s),
        None => match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| blockres::Error::Scenario {
                path: SEED_ENV.into(),
                message: format!("`{v}` is not an unsigned integer"),
            }),
            Err(_) => Ok(0),
        },
    }
}

fn emit(report: &ResourceReport, out: &Output) -> blockres::Result<()> {
    let text = match out.format {
        Format::Json => report.to_json()? + "\n",
        Format::Csv => report.to_csv()?,
    };
    match &out.output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn summarize(report: &ResourceReport) {
    for c in &report.checks {
        let mark = if c.passed { "pass" } else { "FAIL" };
        eprintln!("{mark} {:<32} residual {:.3e} (tolerance {:.1e})", c.id, c.residual, c.tolerance);
    }
}

fn load_report(path: &Path) -> blockres::Result<ResourceReport> {
    ResourceReport::from_json(&std::fs::read_to_string(path)?)
}

fn execute(cli: Cli) -> blockres::Result<bool> {
    let (report, out, quiet) = match cli.command {
        Command::Run { scenario, out } => (run_scenario_path(&scenario)?, out, false),
        Command::Canonical { seed, out } => (canonical_example(seed_or_env(seed)?)?, out, false),
        Command::Selftest { trials, seed, tau_ent, out } => {
            (self_test(trials, seed_or_env(seed)?, tau_ent)?, out, false)
        }
        Command::Report { report, out } => (load_report(&report)?, out, true),
    };
    if !quiet {
        summarize(&report);
    }
    emit(&report, &out)?;
    Ok(report.passed)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED_CHECK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
