use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mollify_cli::{exit, list_json, list_text, CliError, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "mollify", version, about = "Experiments on mollified increment processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        /// JSON config; unspecified fields take the experiment's defaults.
        #[arg(long, required_unless_present = "experiment")]
        config: Option<PathBuf>,
        /// Run an experiment with its default config.
        #[arg(long, conflicts_with = "config")]
        experiment: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicas: Option<usize>,
        /// Exit with status 2 if any check fails.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Print results.json to stdout.
        #[arg(long)]
        json: bool,
    },
    /// List the experiments.
    List {
        #[arg(long)]
        json: bool,
    },
}

fn load(config: Option<PathBuf>, experiment: Option<String>) -> Result<ExperimentConfig, CliError> {
    match (config, experiment) {
        (Some(path), _) => ExperimentConfig::from_file(&path),
        (None, Some(name)) => Ok(ExperimentConfig::defaults(name.parse::<Experiment>()?)),
        (None, None) => Err(CliError::validation("config", "pass --config or --experiment")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors; usage errors are
            // validation failures.
            return ExitCode::from(if e.use_stderr() { exit::VALIDATION as u8 } else { exit::OK as u8 });
        }
    };
    match cli.command {
        Command::List { json } => {
            print!("{}", if json { list_json() } else { list_text() });
            ExitCode::from(exit::OK as u8)
        }
        Command::Run {
            config,
            experiment,
            seed,
            replicas,
            strict,
            output,
            threads,
            json,
        } => {
            let outcome = load(config, experiment).and_then(|mut c| {
                if let Some(s) = seed {
                    c.seed = s;
                }
                if let Some(r) = replicas {
                    c.replicas = r;
                }
                if let Some(o) = output {
                    c.output_dir = o;
                }
                mollify_cli::run(&c, threads)
            });
            match outcome {
                Ok(report) => {
                    let r = &report.results;
                    if json {
                        println!("{}", serde_json::to_string_pretty(r).expect("plain data"));
                    } else {
                        for m in &r.metrics {
                            let verdict = match m.pass {
                                Some(true) => "pass",
                                Some(false) => "FAIL",
                                None => "",
                            };
                            match m.tolerance {
                                Some(t) => println!("{:32} {:>14.6e}  (tol {t:e}) {verdict}", m.name, m.value),
                                None => println!("{:32} {:>14.6e}  {verdict}", m.name, m.value),
                            }
                        }
                        println!(
                            "{}: {} in {:.2}s",
                            r.experiment,
                            if r.pass { "all checks passed" } else { "some checks failed" },
                            report.timing.wall_seconds
                        );
                    }
                    let code = if strict && !r.pass { exit::ACCEPTANCE } else { exit::OK };
                    ExitCode::from(code as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
