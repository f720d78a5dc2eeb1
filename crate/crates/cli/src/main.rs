//! `dpfence`: dual-pixel fence synthesis, disparity, segmentation, removal
//! and evaluation from the command line.
//!
//! Every subcommand writes a JSON run report next to its outputs. Exit codes:
//! 0 on success, 2 on usage errors (bad flags or configs), 1 on runtime
//! failures.

mod commands;
mod report;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "dpfence", version, about = "Dual-pixel fence segmentation and removal")]
struct Cli {
    /// Worker threads; outputs do not depend on it [default: all cores]
    #[arg(long, global = true, env = "DP_DEFENCE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Composite fences into clean frames and write a dataset
    Synth(SynthArgs),
    /// Estimate half-resolution disparity and confidence of a frame
    Disparity(DisparityArgs),
    /// Segment the fence of a frame
    Segment(SegmentArgs),
    /// Segment and inpaint the fence of a frame
    Remove(RemoveArgs),
    /// Score predictions against a dataset manifest
    Eval(EvalArgs),
    /// Render the dual-pixel PSFs of a blur scale as heatmaps
    PsfPreview(PsfPreviewArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Clean frames (frame directories or in-focus images) [default: procedural]
    #[arg(long)]
    pub clean: Option<PathBuf>,
    /// Fence assets (directories with texture and mask) [default: procedural]
    #[arg(long)]
    pub assets: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of samples
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Base seed (overrides the config)
    #[arg(long)]
    pub seed: Option<u64>,
    /// SynthConfig JSON
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also cut training patches
    #[arg(long)]
    pub patches: bool,
    /// Patch size (implies --patches)
    #[arg(long)]
    pub patch: Option<usize>,
    /// Patch stride (implies --patches)
    #[arg(long)]
    pub stride: Option<usize>,
    /// Size of procedural sources
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    #[arg(long, default_value_t = 512)]
    pub height: usize,
    /// Number of procedural clean frames and of procedural fences
    #[arg(long, default_value_t = 4)]
    pub procedural_count: usize,
}

#[derive(Debug, Args)]
pub struct DisparityArgs {
    /// Frame directory (left, right, combined)
    #[arg(long)]
    pub frame: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Largest disparity searched, half-resolution pixels
    #[arg(long)]
    pub dmax: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Aggregation box size (odd)
    #[arg(long)]
    pub window: Option<usize>,
    /// CostParams JSON
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write every cost-volume plane with a JSON sidecar
    #[arg(long)]
    pub dump_volume: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentMode {
    /// Dual-cue disparity and periodicity segmentation
    Classical,
    /// Forward pass of the untrained dual-cue network (shape smoke test)
    LearnedToy,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub frame: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SegmentMode::Classical)]
    pub mode: SegmentMode,
    /// SegmentConfig JSON
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub tau_m: Option<f64>,
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long)]
    pub dmax: Option<f64>,
    /// Network weights directory (learned-toy mode)
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Seed of the generated weights when no directory is given
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct RemoveArgs {
    #[arg(long)]
    pub frame: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// SegmentConfig JSON
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub tau_m: Option<f64>,
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long)]
    pub dmax: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset manifest; sample paths are relative to its directory
    #[arg(long)]
    pub manifest: PathBuf,
    /// Predictions: <pred>/<sample id>/mask.png and optional restored.{pfm,png}
    #[arg(long)]
    pub pred: PathBuf,
    /// Report JSON
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PsfPreviewArgs {
    /// Blur scale (disc radius in pixels)
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Heatmap pixels per kernel tap
    #[arg(long, default_value_t = 8)]
    pub scale: usize,
}

/// An error in how the tool was invoked rather than in the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(UsageError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Disparity(a) => commands::disparity(a),
        Command::Segment(a) => commands::segment(a),
        Command::Remove(a) => commands::remove(a),
        Command::Eval(a) => commands::eval(a),
        Command::PsfPreview(a) => commands::psf_preview(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version go to stdout with status 0, errors use 2
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
