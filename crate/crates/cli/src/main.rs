use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use scenred_cli::{
    cmd_bench, cmd_eval, cmd_gen, cmd_reduce, cmd_train, init_thread_pool, BenchArgs, CliError, EvalArgs, GenArgs,
    ReduceArgs, Reducer, TrainArgs,
};
use scenred_core::reduce::Method;
use scenred_core::solar::SolarGenConfig;

#[derive(Debug, Parser)]
#[command(name = "scenred", version, about = "Scenario reduction with classic heuristics and a convolutional surrogate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic solar scenario sets.
    Gen {
        /// Output directory, or a .csv file when --count is 1.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Scenarios per set.
        #[arg(long, default_value_t = 64)]
        scenarios: usize,
        #[arg(long, default_value_t = 24)]
        horizon: usize,
        #[arg(long, default_value_t = 6)]
        sunrise: usize,
        #[arg(long, default_value_t = 19)]
        sunset: usize,
        #[arg(long, default_value_t = 4.0)]
        peak_kw: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Reduce one scenario-set CSV and print the report as JSON.
    Reduce {
        input: PathBuf,
        /// ffs, sbr, kmeans, hs or dcnn.
        #[arg(long)]
        method: Reducer,
        #[arg(long)]
        target_size: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        lambda_moment: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trained checkpoint, required for dcnn.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Reduced set CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the surrogate on a corpus directory of scenario-set CSVs.
    Train {
        corpus: PathBuf,
        #[arg(long)]
        target_size: usize,
        #[arg(long, default_value_t = 3)]
        filter_width: usize,
        #[arg(long, default_value_t = 10000)]
        epochs: usize,
        #[arg(long, default_value_t = 0.82)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        lambda_moment: f64,
        /// Checkpoint path; `.loss.csv` and `.report.json` go beside it.
        #[arg(long)]
        out: PathBuf,
        /// Print losses every N epochs to stderr; 0 disables.
        #[arg(long, default_value_t = 100)]
        log_every: usize,
    },
    /// Compare a trained surrogate with its teacher on held-out sets.
    Eval {
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0.82)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        lambda_moment: f64,
        /// Evaluate every set, not just the held-out split.
        #[arg(long)]
        all: bool,
        /// Write the full per-set report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time hs against the surrogate on one input.
    Bench {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda_moment: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Additional baselines, comma separated.
        #[arg(long = "method", value_delimiter = ',')]
        extra: Vec<Method>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Write the reports as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_thread_pool()?;
    match cli.command {
        Command::Gen {
            out,
            count,
            scenarios,
            horizon,
            sunrise,
            sunset,
            peak_kw,
            seed,
        } => {
            let config = SolarGenConfig {
                horizon,
                sunrise,
                sunset,
                peak_kw,
                seed,
                ..SolarGenConfig::default()
            };
            let paths = cmd_gen(&GenArgs {
                out,
                count,
                scenarios,
                config,
            })?;
            for p in paths {
                println!("{}", p.display());
            }
        }
        Command::Reduce {
            input,
            method,
            target_size,
            lambda_moment,
            seed,
            model,
            out,
        } => {
            let report = cmd_reduce(&ReduceArgs {
                input,
                method,
                target_size,
                lambda_moment,
                seed,
                model,
                out,
            })?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Train {
            corpus,
            target_size,
            filter_width,
            epochs,
            train_fraction,
            seed,
            lambda_moment,
            out,
            log_every,
        } => {
            let outcome = cmd_train(&TrainArgs {
                corpus,
                target_size,
                filter_width,
                epochs,
                train_fraction,
                seed,
                lambda_moment,
                out,
                log_every: Some(log_every),
            })?;
            let r = &outcome.report;
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "model": outcome.model_path,
                    "loss_csv": outcome.loss_path,
                    "report": outcome.report_path,
                    "epochs": r.epochs,
                    "initial_train_loss": r.train_loss.first(),
                    "initial_test_loss": r.test_loss.first(),
                    "final_train_loss": r.final_train_loss,
                    "final_test_loss": r.final_test_loss,
                    "wall_clock_secs": r.wall_clock_secs,
                }))?
            );
        }
        Command::Eval {
            corpus,
            model,
            train_fraction,
            seed,
            lambda_moment,
            all,
            out,
        } => {
            let report = cmd_eval(&EvalArgs {
                corpus,
                model,
                train_fraction,
                seed,
                lambda_moment,
                all,
            })?;
            if let Some(path) = out {
                write_json(&path, &report)?;
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "sets": report.rows.len(),
                    "bce": report.bce,
                    "median_dcnn_space": report.median_dcnn_space,
                    "median_teacher_space": report.median_teacher_space,
                    "median_dcnn_moment": report.median_dcnn_moment,
                    "median_teacher_moment": report.median_teacher_moment,
                }))?
            );
        }
        Command::Bench {
            input,
            model,
            lambda_moment,
            seed,
            extra,
            repeats,
            out,
        } => {
            let report = cmd_bench(&BenchArgs {
                input,
                model,
                lambda_moment,
                seed,
                extra,
                repeats,
            })?;
            if let Some(path) = out {
                write_json(&path, &report)?;
            }
            print!("{}", report.to_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
