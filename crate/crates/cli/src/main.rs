//! `dkgad`: generate, ingest, featurize, train, predict, ensemble, evaluate
//! and benchmark anomaly detectors over dynamic knowledge graphs.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dkgad::ensemble::{Mechanism, VoteMode};
use dkgad::features::Level;
use dkgad::models::ModelKind;

use crate::commands::{EnsembleArgs, PredictArgs, TrainArgs};
use crate::error::{CliError, CliResult, ErrorKind};

#[derive(Parser)]
#[command(name = "dkgad", version, about = "Anomaly detection over dynamic knowledge graphs")]
struct Cli {
    /// Worker threads for data-parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic scenario as TTL snapshots plus a labels file.
    Generate {
        /// Benchmark TOML; its [scenario] table is used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "DKGAD_DATA", default_value = "data")]
        out: PathBuf,
    },
    /// Parse and validate a snapshot directory into a binary graph cache.
    Ingest {
        #[arg(long = "in", env = "DKGAD_DATA", default_value = "data")]
        input: PathBuf,
        /// Cache path (default: <in>/graph.dkgc).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Drop quads that violate the schema instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Build the raw feature table of one representation level.
    Featurize {
        #[arg(long = "in", env = "DKGAD_DATA", default_value = "data")]
        input: PathBuf,
        #[arg(long)]
        level: Level,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Feature CSV path (default: <in>/features_<level>.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model family on one level and save a checkpoint.
    Train {
        #[arg(long = "in", env = "DKGAD_DATA", default_value = "data")]
        input: PathBuf,
        #[arg(long)]
        level: Level,
        /// svm, xgb, iforest, mlp, tcn or sa.
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run seed; split and model seeds derive from it.
        #[arg(long)]
        seed: Option<u64>,
        /// Checkpoint path (default: <in>/models/<model>_<level>.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score feature rows with a checkpoint.
    Predict {
        #[arg(long = "in", env = "DKGAD_DATA", default_value = "data")]
        input: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long)]
        level: Option<Level>,
        /// Predictions CSV (default: <in>/predictions/<model>_<level>.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Score every row, not only the held-out period.
        #[arg(long)]
        all_rows: bool,
    },
    /// Combine checkpoints listed in an ensemble manifest.
    Ensemble {
        #[arg(long = "in", env = "DKGAD_DATA", default_value = "data")]
        input: PathBuf,
        /// TOML listing mode, mechanism, threshold and member checkpoints.
        #[arg(long)]
        ensemble: PathBuf,
        #[arg(long)]
        mode: Option<VoteMode>,
        #[arg(long)]
        mechanism: Option<Mechanism>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        all_rows: bool,
    },
    /// Compare predictions with ground truth.
    Evaluate {
        /// Predictions CSV (entity,t,score,label).
        #[arg(long = "in")]
        input: PathBuf,
        /// Events file (entity,t_start,t_end,class) or row labels (entity,t,label).
        #[arg(long)]
        labels: PathBuf,
        /// Write the metrics as key=value lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full comparison, one directory per seed.
    Benchmark {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Repeat for several seeds; medians are reported across them.
        #[arg(long)]
        seed: Vec<u64>,
        #[arg(long, default_value = "benchmark")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::new(ErrorKind::Internal, e.to_string()))?;
    }
    match cli.command {
        Command::Generate { config, seed, out } => commands::generate_cmd(config.as_deref(), seed, &out),
        Command::Ingest { input, out, lenient } => commands::ingest_cmd(&input, out.as_deref(), lenient),
        Command::Featurize {
            input,
            level,
            config,
            out,
        } => commands::featurize_cmd(&input, level, config.as_deref(), out.as_deref()),
        Command::Train {
            input,
            level,
            model,
            config,
            seed,
            out,
        } => commands::train_cmd(TrainArgs {
            input: &input,
            level,
            model,
            config: config.as_deref(),
            seed,
            out: out.as_deref(),
        }),
        Command::Predict {
            input,
            checkpoint,
            model,
            level,
            out,
            all_rows,
        } => commands::predict_cmd(PredictArgs {
            input: &input,
            checkpoint: checkpoint.as_deref(),
            model,
            level,
            out: out.as_deref(),
            all_rows,
        }),
        Command::Ensemble {
            input,
            ensemble,
            mode,
            mechanism,
            out,
            all_rows,
        } => commands::ensemble_cmd(EnsembleArgs {
            input: &input,
            manifest: &ensemble,
            mode,
            mechanism,
            out: out.as_deref(),
            all_rows,
        }),
        Command::Evaluate { input, labels, out } => {
            commands::evaluate_cmd(&input, &labels, out.as_deref()).map(|_| ())
        }
        Command::Benchmark { config, seed, out } => {
            commands::benchmark_cmd(config.as_deref(), &seed, &out).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.kind.code() as u8)
        }
    }
}
