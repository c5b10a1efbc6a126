//! `qtun` command-line pipeline. Science parameters live in one JSON config;
//! flags only pick the command and paths. Exit codes: 0 success, 2 config or
//! usage error, 3 data error, 4 numerical error. Failures emit one JSON
//! diagnostic line on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qtun::config::PipelineConfig;
use qtun::models::Family;
use qtun::pipeline;
use qtun::{Error, Result};

#[derive(Parser)]
#[command(name = "qtun", version, about = "Quantum-tunneling kinetics pipeline")]
struct Cli {
    /// Worker thread cap (default: machine parallelism; never affects output bytes)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the reaction catalog and raw quadrature rate curves
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: config output_dir)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit Arrhenius parameters and regenerate the dense dataset
    Augment {
        #[arg(long)]
        config: PathBuf,
        /// Directory holding catalog.json and raw_curves.csv
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Search hyperparameters and train one model family
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Model family: plsr, ridge, extra_trees, random_forest, gbdt, xgb
        #[arg(long)]
        family: String,
        /// Split plan kind: kfold or loo
        #[arg(long)]
        plan: String,
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Run the full family x split-plan benchmark protocol
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Exact Shapley attribution for a trained model
    Explain {
        #[arg(long)]
        config: PathBuf,
        /// Path to model.json
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Build the tunneling phase diagram (CSV + SVG panels)
    Phase {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Run the physics/kinetics oracle suite
    ValidatePhysics {
        #[arg(long)]
        config: PathBuf,
    },
}

fn dir_or_default(dir: Option<PathBuf>, config: &PipelineConfig) -> PathBuf {
    dir.unwrap_or_else(|| PathBuf::from(&config.output_dir))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let line = serde_json::to_string(value)
        .map_err(|e| Error::Format(format!("summary serialization failed: {e}")))?;
    println!("{line}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Spec("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Spec(format!("cannot configure {n} threads: {e}")))?;
    }
    match cli.command {
        Command::Gen { config, out } => {
            let config = PipelineConfig::load(&config)?;
            let summary = pipeline::run_gen(&config, &dir_or_default(out, &config))?;
            print_json(&summary)
        }
        Command::Augment { config, input } => {
            let config = PipelineConfig::load(&config)?;
            let summary = pipeline::run_augment(&config, &dir_or_default(input, &config))?;
            print_json(&summary)
        }
        Command::Train {
            config,
            family,
            plan,
            input,
        } => {
            let config = PipelineConfig::load(&config)?;
            let family = Family::from_label(&family)?;
            let summary =
                pipeline::run_train(&config, &dir_or_default(input, &config), family, &plan)?;
            print_json(&summary)
        }
        Command::Benchmark { config, input } => {
            let config = PipelineConfig::load(&config)?;
            let report = pipeline::run_benchmark(&config, &dir_or_default(input, &config))?;
            for aggregate in &report.aggregates {
                print_json(aggregate)?;
            }
            Ok(())
        }
        Command::Explain {
            config,
            model,
            input,
        } => {
            let config = PipelineConfig::load(&config)?;
            let (_, summary) =
                pipeline::run_explain(&config, &dir_or_default(input, &config), &model)?;
            print_json(&summary)
        }
        Command::Phase { config, input } => {
            let config = PipelineConfig::load(&config)?;
            let summary = pipeline::run_phase(&config, &dir_or_default(input, &config))?;
            print_json(&summary)
        }
        Command::ValidatePhysics { config } => {
            let config = PipelineConfig::load(&config)?;
            let report = pipeline::run_validate_physics(&config)?;
            for check in &report.checks {
                print_json(check)?;
            }
            println!(
                "{{\"passed\":{},\"total\":{}}}",
                report.n_passed(),
                report.checks.len()
            );
            if !report.all_passed() {
                return Err(Error::Numerical(format!(
                    "{} of {} physics checks failed",
                    report.checks.len() - report.n_passed(),
                    report.checks.len()
                )));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let diagnostic = serde_json::json!({
                "error": err.kind(),
                "exit_code": err.exit_code(),
                "message": err.to_string(),
            });
            eprintln!("{diagnostic}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
