use std::path::PathBuf;
use std::process::ExitCode;

use calabi_lab_cli::{describe, list, run, verify, CliError, RunRequest};
use clap::{Parser, Subcommand};

/// Experiment runner. Set KAHLER_LAB_THREADS to pick the thread count.
#[derive(Parser)]
#[command(name = "calabi-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifact directory.
    Run {
        /// experiment name; overrides the config's `experiment` key
        experiment: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        resolution: Option<usize>,
        /// dotted config key assignment, e.g. exponents.q=1.5 (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// List registered experiments.
    List,
    /// Describe an experiment, or `all`.
    Describe { name: String },
    /// Re-run a directory from its recorded config and compare.
    Verify { dir: PathBuf },
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    calabi_lab::par::configure_threads();
    match cli.command {
        Command::List => {
            print!("{}", list());
            ExitCode::SUCCESS
        }
        Command::Describe { name } => match describe(&name) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Run {
            experiment,
            config,
            out,
            seed,
            resolution,
            sets,
        } => {
            if experiment.is_none() && config.is_none() {
                return fail(calabi_lab_cli::error::usage("run needs an experiment name or --config"));
            }
            let req = RunRequest {
                experiment,
                config_path: config,
                out,
                seed,
                resolution,
                sets,
            };
            match run(&req) {
                Ok(r) => {
                    println!("{}", r.dir.display());
                    let failures = r.failures();
                    if failures.is_empty() {
                        println!("PASS {} ({} verdicts)", r.verdicts.table.experiment, r.verdicts.table.verdicts.len());
                        ExitCode::SUCCESS
                    } else {
                        for v in failures {
                            println!("FAIL {}: {} (value {:?})", v.name, v.detail, v.value);
                        }
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Verify { dir } => match verify(&dir) {
            Ok(r) => {
                println!("stats.csv reproduced: {}", r.stats_identical);
                for m in &r.verdict_mismatches {
                    println!("verdict differs: {m}");
                }
                for name in &r.stored.failures {
                    println!("FAIL {name}");
                }
                if r.reproduced() && r.stored.passed {
                    println!("PASS {}", r.stored.table.experiment);
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => fail(e),
        },
    }
}
