//! Command-line front end: file formats, configuration and subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Knobs, RunConfig};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "wstal",
    version,
    about = "Action localization from class activation scores"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub knobs: Knobs,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset: one JSON file per video plus manifest.json.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a score map into detections.json and pseudo_labels.json.
    Pipeline {
        /// JSON with `l`, `K`, row-major `scores` and optional `video_scores`.
        #[arg(long)]
        tcam: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the linear snippet classifier; writes metrics.csv and model.json.
    Train {
        /// Dataset directory written by `synth`; generated from the config when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every variant on consecutive seeds; writes comparison.csv.
    Experiment {
        /// Comma-separated variants, e.g. `nms,gaussian` or `raw_pseudo,delta_pseudo`.
        #[arg(long, value_delimiter = ',', required = true)]
        variants: Vec<String>,
        /// Number of seeds, starting at --seed.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score detections against ground truth; writes eval.csv.
    Eval {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        /// Comma-separated IoU thresholds [default: 0.1,...,0.7].
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = cli.knobs.resolve()?;
    match &cli.command {
        Command::Synth { out } => commands::synth(&cfg, out),
        Command::Pipeline { tcam, out } => commands::pipeline(&cfg, tcam, out),
        Command::Train { data, out } => commands::train_cmd(&cfg, data.as_deref(), out),
        Command::Experiment { variants, seeds, out } => {
            commands::experiment(&cfg, variants, *seeds, out).map(|_| ())
        }
        Command::Eval {
            detections,
            ground_truth,
            thresholds,
            out,
        } => commands::eval(&cfg, detections, ground_truth, thresholds, out).map(|_| ()),
    }
}
