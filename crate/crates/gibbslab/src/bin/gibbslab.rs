use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gibbslab::config::parse_config;
use gibbslab::scenarios;

#[derive(Parser)]
#[command(name = "gibbslab", version, about = "seeded lattice-measure experiments with CSV artifacts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file and write artifacts
    Run {
        /// Path to the config file
        #[arg(long)]
        config: PathBuf,
        /// Output directory for CSV tables and the manifest
        #[arg(long)]
        out: PathBuf,
        /// Override the sampler seed (wins over the file and --set)
        #[arg(long)]
        seed: Option<u64>,
        /// Dotted-path overrides, e.g. --set model.j=0.02
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Thread count for inner parallelism (results do not depend on it)
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the scenario registry
    ListScenarios,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::ListScenarios => {
            for (name, summary) in scenarios::registry() {
                println!("{name:20} {summary}");
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            out,
            seed,
            mut set,
            workers,
        } => {
            if let Some(w) = workers {
                // ignore failure: the global pool can only be set once
                let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
            }
            if let Some(s) = seed {
                set.push(format!("sampler.seed={s}"));
            }
            let text = match fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read config {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let cfg = match parse_config(&text, &set) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let echo = match toml::to_string(&cfg) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot echo config: {e}");
                    return ExitCode::from(2);
                }
            };
            match scenarios::run(&cfg, &echo, &out) {
                Ok(artifact) => {
                    for v in &artifact.verdicts {
                        println!("{}", v.line());
                    }
                    let passed = artifact.verdicts.iter().filter(|v| v.pass).count();
                    println!(
                        "scenario {}: {passed}/{} checks passed, artifacts in {}",
                        cfg.scenario,
                        artifact.verdicts.len(),
                        artifact.out_dir.display()
                    );
                    if artifact.all_pass() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
