use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use typeii::scenario::{self, Report, RunOptions, Suite};

#[derive(Parser)]
#[command(name = "typeii", version, about = "Index pairings and cocycle identities in finite semifinite models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a scenario file.
    Run {
        scenario: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override every task tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Include slow tasks.
        #[arg(long)]
        slow: bool,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run a built-in verification suite.
    Verify {
        #[arg(long, value_parser = parse_suite)]
        suite: Suite,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        slow: bool,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pair a module with each element of a K-theory file by every applicable method.
    Pair {
        #[arg(long)]
        module: PathBuf,
        #[arg(long)]
        ktheory: PathBuf,
        #[arg(long, default_value = "0..6")]
        levels: String,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: typeii::Error| e.to_string())
}

/// Usage and input problems exit with 2, anything that ran and failed with 1.
enum Failure {
    Usage(String),
    Failed,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn emit<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(usage)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn summarize(r: &Report) {
    let s = &r.summary;
    eprintln!(
        "{}: {} tasks, {} passed, {} failed, {} errors, {} skipped (seed {})",
        r.scenario, s.total, s.passed, s.failed, s.errors, s.skipped, r.seed
    );
    for t in r.tasks.iter().filter(|t| !t.pass || t.error.is_some()) {
        let name = t.label.as_deref().unwrap_or(&t.kind);
        match &t.error {
            Some(e) => eprintln!("  [{}] {name}: error: {e}", t.index),
            None => eprintln!("  [{}] {name}: FAIL {}", t.index, t.notes.join("; ")),
        }
    }
}

fn read_json(p: &Path) -> Result<serde_json::Value, Failure> {
    let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
}

fn main_inner(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { scenario, out, seed, tol, slow, jobs } => {
            let sc = scenario::load_scenario(&scenario).map_err(usage)?;
            let report = scenario::run(&sc, &RunOptions { seed, tol, slow, jobs }).map_err(usage)?;
            summarize(&report);
            emit(&report, out.as_deref())?;
            report.pass.then_some(()).ok_or(Failure::Failed)
        }
        Command::Verify { suite, seed, slow, jobs, out } => {
            let report = scenario::verify(suite, &RunOptions { seed, tol: None, slow, jobs }).map_err(usage)?;
            for r in &report.reports {
                summarize(r);
            }
            emit(&report, out.as_deref())?;
            eprintln!("suite {:?}: {}", suite, if report.pass { "pass" } else { "FAIL" });
            report.pass.then_some(()).ok_or(Failure::Failed)
        }
        Command::Pair { module, ktheory, levels, tol, out } => {
            let levels = scenario::parse_levels(&levels).map_err(usage)?;
            let report = scenario::pair(&read_json(&module)?, &read_json(&ktheory)?, levels, tol).map_err(usage)?;
            for p in &report.pairings {
                match (&p.agreement, &p.error) {
                    (Some(a), _) => eprintln!(
                        "{}: index {} over {} methods, max deviation {:.3e}{}",
                        p.element,
                        a.reference,
                        a.methods.len(),
                        a.max_deviation,
                        if a.pass { "" } else { " FAIL" }
                    ),
                    (None, Some(e)) => eprintln!("{}: error: {e}", p.element),
                    (None, None) => {}
                }
            }
            emit(&report, out.as_deref())?;
            report.pass.then_some(()).ok_or(Failure::Failed)
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Failed) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
