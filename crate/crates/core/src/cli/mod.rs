//! Command-line front end.
//!
//! Exit codes: 0 success, 1 operational error, 2 when the requested target
//! class is not the model's prediction on the full input.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::attribution::{Fill, Target};
use crate::error::Error;

pub use manifest::RunManifest;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_MISPREDICTION: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "token-insight",
    version,
    about = "ViT inference and token-discarding attribution"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Attribute one image and write its trace JSON.
    Explain(ExplainArgs),
    /// Attribute every image in a directory.
    Batch(BatchArgs),
    /// Aggregate a directory of trace JSON files into CSV and JSON.
    Stats(StatsArgs),
    /// Per-patch occlusion baseline for one image.
    Occlude(OccludeArgs),
    /// Print the tensor table of a weight archive.
    Inspect(InspectArgs),
    /// List registered attribution methods and config presets.
    Methods,
}

fn parse_triple(s: &str) -> Result<[f32; 3], String> {
    let parts: Vec<f32> = s
        .split(',')
        .map(|p| p.trim().parse::<f32>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|v: Vec<f32>| format!("expected 3 comma-separated values, got {}", v.len()))
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Geometry preset (vitb16 or tiny).
    #[arg(long, default_value = "vitb16")]
    pub config: String,
    #[arg(long)]
    pub image_size: Option<usize>,
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Per-channel normalization mean, "r,g,b".
    #[arg(long, value_parser = parse_triple)]
    pub mean: Option<[f32; 3]>,
    /// Per-channel normalization std, "r,g,b".
    #[arg(long, value_parser = parse_triple)]
    pub std: Option<[f32; 3]>,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// Class to explain, or "auto" for the model's prediction.
    #[arg(long, default_value = "auto")]
    pub target: Target,
    /// Iteration cap; defaults to the token count.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Threads for candidate evaluation.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Candidates evaluated per wave; defaults to all at once.
    #[arg(long)]
    pub wave_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Attribution method name.
    #[arg(long, default_value = "token-insight")]
    pub method: String,
    /// Write a heatmap overlay (PNG if the extension is .png, else PPM).
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[arg(long)]
    pub dir: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Images processed concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Directory of trace JSON files (or a single trace file).
    #[arg(long)]
    pub traces: PathBuf,
    /// Output directory for traces.csv, stats.csv, curve.csv and stats.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OccludeArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub fill: Fill,
    #[arg(long, default_value = "auto")]
    pub target: Target,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub weights: PathBuf,
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InitialMisprediction { .. } => EXIT_MISPREDICTION,
        _ => EXIT_ERROR,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_OK });
        }
    };
    let result = match cli.command {
        Command::Explain(a) => commands::explain(&a),
        Command::Batch(a) => commands::batch(&a),
        Command::Stats(a) => commands::stats(&a),
        Command::Occlude(a) => commands::occlude(&a),
        Command::Inspect(a) => commands::inspect(&a),
        Command::Methods => commands::methods(),
    };
    match result {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
