//! `spl-lab`: run and validate scenario files for the SPL network
//! simulation laboratory.
//!
//! Exit codes: 0 success, 1 expectation failure, 2 validation error,
//! 3 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spl_lab::scenario::{builtin_fixtures, load_scenario, OutputFormat, OutputSpec};
use spl_lab::{run_experiment, RunError};

#[derive(Parser)]
#[command(name = "spl-lab", about = "Stable parallel looped network laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and emit its metrics report.
    Run {
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the replicate count.
        #[arg(long)]
        replicates: Option<usize>,
        /// Override the output path ("-" writes to stdout).
        #[arg(long)]
        out: Option<String>,
        /// Override the output format.
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// Parse and validate a scenario without running it.
    Validate { scenario: PathBuf },
    /// List the builtin assets reachable as `fixture:<name>`.
    ListFixtures,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("SPL_LAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    match Cli::parse().command {
        Command::ListFixtures => {
            for (name, description) in builtin_fixtures() {
                println!("fixture:{name:<22} {description}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { scenario } => match load_scenario(&scenario) {
            Ok(loaded) => {
                println!(
                    "ok: scenario {} (kind {})",
                    loaded.scenario.id,
                    loaded.scenario.payload.kind_name()
                );
                ExitCode::SUCCESS
            }
            Err(err) => {
                eprintln!("validation error: {err}");
                ExitCode::from(2)
            }
        },
        Command::Run {
            scenario,
            seed,
            replicates,
            out,
            format,
        } => {
            let mut loaded = match load_scenario(&scenario) {
                Ok(l) => l,
                Err(err) => {
                    eprintln!("validation error: {err}");
                    return ExitCode::from(2);
                }
            };
            if let Some(seed) = seed {
                loaded.scenario.seed = seed;
            }
            if let Some(replicates) = replicates {
                loaded.scenario.replicates = replicates;
            }
            if let Some(path) = out {
                let format = format
                    .or(loaded.scenario.output.as_ref().map(|o| o.format))
                    .unwrap_or(OutputFormat::Json);
                loaded.scenario.output = Some(OutputSpec { path, format });
            } else if let (Some(format), Some(output)) = (format, loaded.scenario.output.as_mut())
            {
                output.format = format;
            }

            let report = match run_experiment(&loaded) {
                Ok(r) => r,
                Err(RunError::Scenario(err)) => {
                    eprintln!("validation error: {err}");
                    return ExitCode::from(2);
                }
                Err(err) => {
                    eprintln!("runtime error: {err}");
                    return ExitCode::from(3);
                }
            };

            let outcome = match loaded.scenario.output {
                Some(OutputSpec { ref path, format }) if path != "-" => {
                    let target = if PathBuf::from(path).is_absolute() {
                        PathBuf::from(path)
                    } else {
                        std::env::current_dir().unwrap_or_default().join(path)
                    };
                    report.emit(format, &target).map(|()| {
                        println!("wrote {}", target.display());
                    })
                }
                Some(OutputSpec { format, .. }) => {
                    let bytes = match format {
                        OutputFormat::Json => report.to_json_bytes(),
                        OutputFormat::Csv => report.to_csv_bytes(),
                    };
                    print!("{}", String::from_utf8_lossy(&bytes));
                    Ok(())
                }
                None => {
                    print!("{}", String::from_utf8_lossy(&report.to_json_bytes()));
                    Ok(())
                }
            };
            if let Err(err) = outcome {
                eprintln!("runtime error: cannot write output: {err}");
                return ExitCode::from(3);
            }

            for check in &report.checks {
                eprintln!(
                    "check {}: {} ({})",
                    check.metric,
                    if check.pass { "pass" } else { "FAIL" },
                    check.detail
                );
            }
            match report.pass {
                Some(false) => ExitCode::from(1),
                _ => ExitCode::SUCCESS,
            }
        }
    }
}
