//! `csishift` command-line front end.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(name = "csishift", version, about = "WiFi CSI activity recognition and dataset-shift toolkit")]
pub struct Cli {
    /// Seed for every random stream; overrides seeds in the config
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (created if missing) [default: .]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON config for the subcommand
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log more (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Train,
    Test,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Generate a synthetic benchmark (config: benchmark spec)
    Simulate,
    /// Validate a capture and write it in canonical CSI1 order
    Ingest {
        /// CSI1 capture, or raw bytes when --layout is given
        #[arg(long)]
        input: PathBuf,
        /// JSON field layout for importing a foreign binary format
        #[arg(long)]
        layout: Option<PathBuf>,
    },
    /// Turn a capture plus annotations into labeled windows (config: process options)
    Process {
        #[arg(long)]
        capture: PathBuf,
        /// JSONL annotation records
        #[arg(long)]
        annotations: PathBuf,
        /// JSON array of video frame timestamps in microseconds
        #[arg(long)]
        frames: PathBuf,
    },
    /// Train a classifier (config: model and train settings)
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Partition file; trains on its train side
        #[arg(long)]
        partition: Option<PathBuf>,
        /// Partition kind to pick from a file holding several
        #[arg(long)]
        kind: Option<String>,
    },
    /// Evaluate a trained model
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long)]
        kind: Option<String>,
        /// Partition side to evaluate
        #[arg(long, value_enum, default_value = "test")]
        side: Side,
    },
    /// t-SNE embedding with an SVG scatter (config: embed settings)
    Embed {
        /// Any tensor; rows are points. A dataset sidecar supplies labels.
        #[arg(long)]
        input: PathBuf,
        /// Embed this model's features of the dataset instead of raw rows
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run a dataset-shift experiment (config: model, train and shift settings)
    Shift {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        kind: Option<String>,
    },
    /// Re-run a command from its manifest
    Replay { manifest: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<config::UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
