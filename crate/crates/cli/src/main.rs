use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use torclass_cli::commands::{self, CensusArgs, Outcome, EXIT_ERROR};
use torclass_cli::document::{canonical_json, write_atomic};
use torclass_core::census::{Dedup, DEFAULT_BUDGET, THREADS_ENV};
use torclass_core::classify::Mode;
use torclass_core::localmodel::LocalCheckConfig;

/// Classification tools for locally standard torus manifolds.
#[derive(Parser, Debug)]
#[command(name = "torclass", version)]
struct Cli {
    /// Write the report here (atomically) instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that a pair document describes a locally standard action.
    Validate { path: PathBuf },
    /// Decide whether two pairs are equivalent.
    Iso {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "strong")]
        mode: Mode,
    },
    /// Print the canonical form of a pair.
    Canon {
        path: PathBuf,
        #[arg(long, default_value = "strong")]
        mode: Mode,
    },
    /// Enumerate characteristic functions over a poset.
    Census {
        #[arg(long)]
        poset: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        bound: i64,
        #[arg(long, default_value = "none")]
        dedup: Dedup,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: f64,
        #[arg(long, env = THREADS_ENV)]
        threads: Option<usize>,
    },
    /// Numerically check the lifted diffeomorphism on the standard chart.
    Localcheck {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        m: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        specs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Check the identity spec instead of random ones.
        #[arg(long)]
        trivial: bool,
    },
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Validate { path } => commands::validate(&path),
        Command::Iso { a, b, mode } => commands::iso(&a, &b, mode),
        Command::Canon { path, mode } => commands::canon(&path, mode),
        Command::Census { poset, k, bound, dedup, budget, threads } => {
            commands::census(&poset, &CensusArgs { k, bound, dedup, budget, threads })
        }
        Command::Localcheck { n, k, m, samples, specs, seed, trivial } => {
            commands::localcheck(&LocalCheckConfig { n, k, m, samples, specs, seed, trivial })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            let outcome = commands::error_outcome("usage", e.kind());
            print!("{}", canonical_json(&outcome.report));
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    let out = cli.out.clone();
    let outcome = run(cli);
    let text = canonical_json(&outcome.report);
    if let Some(err) = outcome.report.get("error") {
        eprintln!("error: {}", err.as_str().unwrap_or_default());
    }
    match out {
        Some(path) => {
            if let Err(e) = write_atomic(&path, &text) {
                eprintln!("error: {e}");
                print!("{}", canonical_json(&commands::error_outcome("output", &e).report));
                return ExitCode::from(EXIT_ERROR as u8);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(outcome.code as u8)
}
